#include "umbra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace umbra {
namespace {

int bin_of(double value, int bins) {
    int k = static_cast<int>(value * bins);
    return std::clamp(k, 0, bins - 1);  // closes the last bin at 1.0
}

void require_normalized(std::span<const double> v, const char* side) {
    double sum = 0.0;
    for (double x : v) {
        if (!(x >= 0.0)) throw Error(std::string("emd_1d: negative mass in ") + side);
        sum += x;
    }
    if (std::abs(sum - 1.0) > ColorHistogram::kNormTolerance) {
        throw Error(std::string("emd_1d: ") + side + " not normalized (sum " +
                    std::to_string(sum) + ")");
    }
}

double color_distance(const Rgb& a, const Rgb& b) {
    double dr = static_cast<double>(a.r) - b.r;
    double dg = static_cast<double>(a.g) - b.g;
    double db = static_cast<double>(a.b) - b.b;
    return std::sqrt(dr * dr + dg * dg + db * db);
}

// Exact nearest-color search over a bucket grid in RGB space. Buckets are
// visited in expanding Chebyshev rings around the query's cell; a point in
// ring R is at least (R-1) cells away on some axis, so the search stops as
// soon as the best distance found rules the next ring out. Distances go
// through color_distance, so results are bit-identical to the quadratic
// scan.
class NearestColorIndex {
public:
    explicit NearestColorIndex(const std::vector<Rgb>& colors) : colors_(colors) {
        res_ = std::clamp(static_cast<int>(std::cbrt(static_cast<double>(colors.size()))),
                          2, 24);
        buckets_.resize(static_cast<std::size_t>(res_) * res_ * res_);
        for (std::size_t i = 0; i < colors.size(); ++i) {
            buckets_[bucket_of(colors[i])].push_back(static_cast<int>(i));
        }
    }

    double nearest_distance(const Rgb& query) const {
        const double cell = 1.0 / res_;
        const int qx = axis_of(query.r);
        const int qy = axis_of(query.g);
        const int qz = axis_of(query.b);
        double best = std::numeric_limits<double>::infinity();
        const int max_ring = res_;  // covers the whole cube
        for (int ring = 0; ring <= max_ring; ++ring) {
            // a point in ring R is at least (R-1) cells away on some axis
            if (ring >= 1 && best <= cell * (ring - 1)) break;
            scan_ring(qx, qy, qz, ring, query, best);
        }
        return best;
    }

private:
    int axis_of(float v) const {
        return std::clamp(static_cast<int>(v * res_), 0, res_ - 1);
    }
    std::size_t bucket_of(const Rgb& c) const {
        return (static_cast<std::size_t>(axis_of(c.r)) * res_ + axis_of(c.g)) * res_ +
               axis_of(c.b);
    }

    void scan_cell(int x, int y, int z, const Rgb& query, double& best) const {
        if (x < 0 || x >= res_ || y < 0 || y >= res_ || z < 0 || z >= res_) return;
        std::size_t b = (static_cast<std::size_t>(x) * res_ + y) * res_ + z;
        for (int idx : buckets_[b]) {
            best = std::min(best, color_distance(query, colors_[idx]));
        }
    }

    void scan_ring(int qx, int qy, int qz, int ring, const Rgb& query,
                   double& best) const {
        if (ring == 0) {
            scan_cell(qx, qy, qz, query, best);
            return;
        }
        for (int dx = -ring; dx <= ring; ++dx) {
            for (int dy = -ring; dy <= ring; ++dy) {
                if (std::abs(dx) == ring || std::abs(dy) == ring) {
                    for (int dz = -ring; dz <= ring; ++dz) {
                        scan_cell(qx + dx, qy + dy, qz + dz, query, best);
                    }
                } else {
                    scan_cell(qx + dx, qy + dy, qz - ring, query, best);
                    scan_cell(qx + dx, qy + dy, qz + ring, query, best);
                }
            }
        }
    }

    const std::vector<Rgb>& colors_;
    int res_ = 2;
    std::vector<std::vector<int>> buckets_;
};

}  // namespace

ColorHistogram histogram(const PixelSet& pixels, int bins) {
    if (bins < 2) throw Error("histogram needs at least 2 bins");
    ColorHistogram h;
    h.bins = bins;
    for (auto& ch : h.channels) ch.assign(bins, 0.0);
    if (pixels.empty()) {
        h.empty_input = true;
        return h;
    }
    for (const Rgb& c : pixels.colors) {
        h.channels[0][bin_of(c.r, bins)] += 1.0;
        h.channels[1][bin_of(c.g, bins)] += 1.0;
        h.channels[2][bin_of(c.b, bins)] += 1.0;
    }
    const double inv = 1.0 / static_cast<double>(pixels.size());
    for (auto& ch : h.channels) {
        for (double& v : ch) v *= inv;
    }
    return h;
}

double emd_1d(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw Error("emd_1d: size mismatch or fewer than 2 bins");
    }
    require_normalized(a, "first histogram");
    require_normalized(b, "second histogram");
    // With ground distance |i-j|/B the optimal 1-D transport cost equals the
    // L1 distance between CDFs scaled by 1/B.
    double cum = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        cum += a[k] - b[k];
        total += std::abs(cum);
    }
    return total / static_cast<double>(a.size());
}

double channel_emd(const ColorHistogram& a, const ColorHistogram& b) {
    if (a.empty_input || b.empty_input) {
        throw Error("channel_emd: histogram built from an empty pixel set");
    }
    if (a.bins != b.bins) throw Error("channel_emd: bin count mismatch");
    double sum = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
        sum += emd_1d(a.channels[ch], b.channels[ch]);
    }
    return sum / 3.0;
}

double distance_loss(const PixelSet& inside, const PixelSet& outside) {
    if (inside.empty() || outside.empty()) {
        throw Error("distance_loss: empty pixel set");
    }
    double sum = 0.0;
    if (inside.size() * outside.size() < 4096) {
        for (const Rgb& u : inside.colors) {
            double best = std::numeric_limits<double>::infinity();
            for (const Rgb& v : outside.colors) {
                best = std::min(best, color_distance(u, v));
            }
            sum += best;
        }
    } else {
        NearestColorIndex index(outside.colors);
        for (const Rgb& u : inside.colors) {
            sum += index.nearest_distance(u);
        }
    }
    return sum / static_cast<double>(inside.size());
}

double distribution_loss(const PixelSet& inside, const PixelSet& outside, int bins) {
    if (inside.empty() || outside.empty()) {
        throw Error("distribution_loss: empty pixel set");
    }
    return channel_emd(histogram(inside, bins), histogram(outside, bins));
}

std::array<double, kPatchDescriptorSize> patch_descriptor(const Patch& p) {
    if (p.size < 2) throw Error("patch_descriptor: patch smaller than 2x2");
    std::array<double, kPatchDescriptorSize> d{};

    const int n = p.size * p.size;
    std::array<double, 3> mean{};
    for (int i = 0; i < n; ++i) {
        mean[0] += p.pixels[3 * i];
        mean[1] += p.pixels[3 * i + 1];
        mean[2] += p.pixels[3 * i + 2];
    }
    for (auto& m : mean) m /= n;
    std::array<double, 3> var{};
    for (int i = 0; i < n; ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            double diff = p.pixels[3 * i + ch] - mean[ch];
            var[ch] += diff * diff;
        }
    }
    for (int ch = 0; ch < 3; ++ch) {
        d[ch] = mean[ch];
        d[3 + ch] = std::sqrt(var[ch] / n);
    }

    // Luminance gradient magnitudes: forward differences, zero at the last
    // row/column, binned over [0, sqrt(2)].
    constexpr int kGradBins = 8;
    const double max_mag = std::sqrt(2.0);
    std::array<double, kGradBins> grad{};
    for (int r = 0; r < p.size; ++r) {
        for (int c = 0; c < p.size; ++c) {
            double lum = luminance(p.pixel(r, c));
            double gx = (c + 1 < p.size) ? luminance(p.pixel(r, c + 1)) - lum : 0.0;
            double gy = (r + 1 < p.size) ? luminance(p.pixel(r + 1, c)) - lum : 0.0;
            double mag = std::sqrt(gx * gx + gy * gy);
            int k = std::clamp(static_cast<int>(mag / max_mag * kGradBins), 0, kGradBins - 1);
            grad[k] += 1.0;
        }
    }
    for (int k = 0; k < kGradBins; ++k) {
        d[6 + k] = grad[k] / n;
    }
    return d;
}

double descriptor_distance(const Patch& a, const Patch& b) {
    auto da = patch_descriptor(a);
    auto db = patch_descriptor(b);
    double sum = 0.0;
    for (int i = 0; i < kPatchDescriptorSize; ++i) {
        double diff = da[i] - db[i];
        sum += diff * diff;
    }
    return std::sqrt(sum);
}

double texture_loss(std::span<const Patch> inside, std::span<const Patch> outside,
                    const PatchDistance& dist) {
    if (inside.empty() || outside.empty()) {
        throw Error("texture_loss: empty patch list");
    }
    const PatchDistance& d = dist ? dist : PatchDistance(descriptor_distance);
    double sum = 0.0;
    for (const Patch& p : inside) {
        double best = std::numeric_limits<double>::infinity();
        for (const Patch& q : outside) {
            best = std::min(best, d(p, q));
        }
        sum += best;
    }
    return sum / static_cast<double>(inside.size());
}

double nonshadow_loss(const RgbImage& output, const RgbImage& input,
                      const BinaryMask& shadow) {
    if (output.height() != input.height() || output.width() != input.width() ||
        shadow.height() != input.height() || shadow.width() != input.width()) {
        throw Error("nonshadow_loss: dimension mismatch");
    }
    double sum = 0.0;
    long n = 0;
    for (int r = 0; r < input.height(); ++r) {
        for (int c = 0; c < input.width(); ++c) {
            if (shadow.get(r, c)) continue;
            for (int ch = 0; ch < 3; ++ch) {
                double diff = static_cast<double>(output.channel(r, c, ch)) -
                              input.channel(r, c, ch);
                sum += diff * diff;
            }
            ++n;
        }
    }
    if (n == 0) throw Error("nonshadow_loss: mask covers the whole image");
    return sum / static_cast<double>(n * 3);
}

LossReport total_loss(const std::vector<RegionLoss>& region_losses, double nonshadow,
                      const LossWeights& weights) {
    if (region_losses.empty()) throw Error("total_loss: no region components");
    for (double w : {weights.distance, weights.distribution, weights.texture,
                     weights.nonshadow}) {
        if (!std::isfinite(w) || w < 0.0) {
            throw Error("total_loss: weights must be finite and nonnegative");
        }
    }
    LossReport report;
    report.per_region = region_losses;
    report.nonshadow = nonshadow;

    auto average = [&](auto member) {
        double sum = 0.0;
        int n = 0;
        for (const RegionLoss& rl : region_losses) {
            if ((rl.*member).has_value()) {
                sum += *(rl.*member);
                ++n;
            }
        }
        return n > 0 ? sum / n : 0.0;
    };
    report.distance = average(&RegionLoss::distance);
    report.distribution = average(&RegionLoss::distribution);
    report.texture = average(&RegionLoss::texture);

    report.total = weights.distance * report.distance +
                   weights.distribution * report.distribution +
                   weights.texture * report.texture + weights.nonshadow * report.nonshadow;
    return report;
}

double cdd(const PixelSet& shadow_side, const PixelSet& nonshadow_side, int bins) {
    if (shadow_side.empty() || nonshadow_side.empty()) {
        throw Error("cdd: empty annotation set");
    }
    return channel_emd(histogram(shadow_side, bins), histogram(nonshadow_side, bins));
}

CddAggregate cdd_aggregate(const std::vector<double>& raw_values) {
    if (raw_values.empty()) throw Error("cdd_aggregate: empty value list");
    double mean = 0.0;
    for (double v : raw_values) mean += v;
    mean /= static_cast<double>(raw_values.size());
    double var = 0.0;
    for (double v : raw_values) {
        double diff = v - mean;
        var += diff * diff;
    }
    var /= static_cast<double>(raw_values.size());
    return {mean * 1000.0, var * 1000.0};
}

}  // namespace umbra
