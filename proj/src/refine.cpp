#include "umbra/refine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "umbra/morphology.hpp"
#include "umbra/rng.hpp"

namespace umbra {
namespace {

bool is_identity(const ChannelAffine& a) {
    return a.gain == std::array<double, 3>{1.0, 1.0, 1.0} &&
           a.offset == std::array<double, 3>{0.0, 0.0, 0.0};
}

float clamp01(double v) {
    return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

Rgb affine_blend(const Rgb& in, const ChannelAffine& a, float alpha) {
    if (is_identity(a)) return in;
    Rgb corrected{clamp01(a.gain[0] * in.r + a.offset[0]),
                  clamp01(a.gain[1] * in.g + a.offset[1]),
                  clamp01(a.gain[2] * in.b + a.offset[2])};
    if (alpha >= 1.0f) return corrected;
    if (alpha <= 0.0f) return in;
    const double t = alpha;
    return {static_cast<float>(t * corrected.r + (1.0 - t) * in.r),
            static_cast<float>(t * corrected.g + (1.0 - t) * in.g),
            static_cast<float>(t * corrected.b + (1.0 - t) * in.b)};
}

const ChannelAffine& affine_for_region(const RelightParams& params, int region_id) {
    auto it = params.per_region.find(region_id);
    return it != params.per_region.end() ? it->second : params.global;
}

}  // namespace

std::vector<float> blend_alpha(const BinaryMask& mask, int blend_width) {
    if (blend_width < 0) throw Error("blend_width must be >= 0");
    std::vector<float> alpha(static_cast<std::size_t>(mask.height()) * mask.width());
    if (blend_width == 0) {
        for (int r = 0; r < mask.height(); ++r) {
            for (int c = 0; c < mask.width(); ++c) {
                alpha[static_cast<std::size_t>(r) * mask.width() + c] =
                    mask.get(r, c) ? 1.0f : 0.0f;
            }
        }
        return alpha;
    }
    std::vector<float> dist = distance_to_background(mask);
    for (std::size_t i = 0; i < dist.size(); ++i) {
        alpha[i] = std::min(1.0f, dist[i] / static_cast<float>(blend_width));
    }
    return alpha;
}

RgbImage apply_relight(const RgbImage& input, const BinaryMask& shadow,
                       std::span<const MaterialRegion> regions,
                       const RelightParams& params, int blend_width) {
    if (input.height() != shadow.height() || input.width() != shadow.width()) {
        throw Error("apply_relight: dimension mismatch");
    }
    std::vector<float> alpha = blend_alpha(shadow, blend_width);

    // Pixel -> owning region, for per-region parameters. Region masks (one
    // per segment) are disjoint.
    std::vector<int> region_of;
    if (!params.per_region.empty()) {
        region_of.assign(alpha.size(), 0);
        for (const MaterialRegion& region : regions) {
            if (params.per_region.find(region.segment_id) == params.per_region.end())
                continue;
            for (int r = 0; r < shadow.height(); ++r) {
                for (int c = 0; c < shadow.width(); ++c) {
                    if (region.mask.get(r, c)) {
                        region_of[static_cast<std::size_t>(r) * shadow.width() + c] =
                            region.segment_id;
                    }
                }
            }
        }
    }

    RgbImage out(input.height(), input.width());
    for (int r = 0; r < input.height(); ++r) {
        for (int c = 0; c < input.width(); ++c) {
            std::size_t i = static_cast<std::size_t>(r) * input.width() + c;
            const ChannelAffine& a = region_of.empty()
                                         ? params.global
                                         : affine_for_region(params, region_of[i]);
            out.set_pixel(r, c, affine_blend(input.pixel(r, c), a, alpha[i]));
        }
    }
    return out;
}

// --- objective -------------------------------------------------------------

struct ObjectiveContext::RelitPixelSet {
    std::vector<Coord> coords;
    std::vector<Rgb> input_colors;
    std::vector<float> alphas;
    std::vector<int> region_ids;
};

struct ObjectiveContext::SampleData {
    RelitPixelSet inside;
    PixelSet outside_fixed;  // outside the mask, untouched by the relight
};

ObjectiveContext::~ObjectiveContext() = default;
ObjectiveContext::ObjectiveContext(ObjectiveContext&&) noexcept = default;

ObjectiveContext::ObjectiveContext(const BinaryMask& shadow,
                                   std::vector<MaterialRegion> regions,
                                   std::vector<EdgeSampleSet> samples,
                                   const RefineConfig& cfg)
    : width_(shadow.width()),
      regions_(std::move(regions)),
      samples_(std::move(samples)),
      variant_(cfg.variant),
      weights_(cfg.weights),
      bins_(cfg.bins),
      alpha_(blend_alpha(shadow, cfg.blend_width)) {
    if (samples_.empty()) {
        throw Error("no material-consistent shadow edge found");
    }
    auto region_id_at = [&](const Coord& coord) {
        for (const MaterialRegion& region : regions_) {
            if (region.mask.get(coord.row, coord.col)) return region.segment_id;
        }
        return 0;
    };
    data_.reserve(samples_.size());
    for (const EdgeSampleSet& set : samples_) {
        SampleData sd;
        sd.inside.coords = set.inside.coords;
        sd.inside.input_colors = set.inside.colors;
        sd.inside.alphas.reserve(set.inside.size());
        sd.inside.region_ids.reserve(set.inside.size());
        for (const Coord& coord : set.inside.coords) {
            sd.inside.alphas.push_back(
                alpha_[static_cast<std::size_t>(coord.row) * width_ + coord.col]);
            sd.inside.region_ids.push_back(region_id_at(coord));
        }
        sd.outside_fixed = set.outside;
        data_.push_back(std::move(sd));

        pooled_inside_.insert(pooled_inside_.end(), set.inside.coords.begin(),
                              set.inside.coords.end());
        pooled_outside_.insert(pooled_outside_.end(), set.outside.coords.begin(),
                               set.outside.coords.end());
    }

    std::map<int, std::array<double, 4>> sums;  // r, g, b, count
    std::array<double, 4> pooled_sum{};
    for (const SampleData& sd : data_) {
        for (std::size_t i = 0; i < sd.inside.input_colors.size(); ++i) {
            const Rgb& c = sd.inside.input_colors[i];
            auto& s = sums[sd.inside.region_ids[i]];
            s[0] += c.r;
            s[1] += c.g;
            s[2] += c.b;
            s[3] += 1.0;
            pooled_sum[0] += c.r;
            pooled_sum[1] += c.g;
            pooled_sum[2] += c.b;
            pooled_sum[3] += 1.0;
        }
    }
    if (pooled_sum[3] > 0.0) {
        pooled_mean_ = {pooled_sum[0] / pooled_sum[3], pooled_sum[1] / pooled_sum[3],
                        pooled_sum[2] / pooled_sum[3]};
    }
    for (const auto& [id, s] : sums) {
        if (s[3] > 0.0) {
            region_means_[id] = {s[0] / s[3], s[1] / s[3], s[2] / s[3]};
        }
    }
}

std::array<double, 3> ObjectiveContext::inside_mean(int region_id) const {
    auto it = region_means_.find(region_id);
    return it != region_means_.end() ? it->second : pooled_mean_;
}

PixelSet ObjectiveContext::relight_set(const RelitPixelSet& set,
                                       const RelightParams& params) const {
    PixelSet out;
    out.coords = set.coords;
    out.colors.resize(set.input_colors.size());
    for (std::size_t i = 0; i < set.input_colors.size(); ++i) {
        const ChannelAffine& a = params.per_region.empty()
                                     ? params.global
                                     : affine_for_region(params, set.region_ids[i]);
        out.colors[i] = affine_blend(set.input_colors[i], a, set.alphas[i]);
    }
    return out;
}

Patch ObjectiveContext::relight_patch(const Patch& original, int region_id,
                                      const RelightParams& params) const {
    const ChannelAffine& a = params.per_region.empty()
                                 ? params.global
                                 : affine_for_region(params, region_id);
    Patch out = original;
    std::size_t k = 0;
    for (int r = 0; r < original.size; ++r) {
        for (int c = 0; c < original.size; ++c) {
            std::size_t flat =
                static_cast<std::size_t>(original.top_left.row + r) * width_ +
                (original.top_left.col + c);
            Rgb px{original.pixels[k], original.pixels[k + 1], original.pixels[k + 2]};
            Rgb relit = affine_blend(px, a, alpha_[flat]);
            out.pixels[k] = relit.r;
            out.pixels[k + 1] = relit.g;
            out.pixels[k + 2] = relit.b;
            k += 3;
        }
    }
    return out;
}

LossReport ObjectiveContext::evaluate(const RelightParams& params) const {
    std::vector<RegionLoss> entries;

    auto texture_of_group = [&](const PatchGroup& group) -> std::optional<double> {
        if (group.inside.empty() || group.outside.empty()) return std::nullopt;
        std::vector<Patch> relit;
        relit.reserve(group.inside.size());
        for (const Patch& p : group.inside) {
            relit.push_back(relight_patch(p, group.region_id, params));
        }
        return texture_loss(relit, group.outside);
    };

    if (variant_ == LossVariant::PerMask) {
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            const EdgeSampleSet& set = samples_[i];
            RegionLoss rl;
            rl.region_id = set.region_id;
            PixelSet relit_inside = relight_set(data_[i].inside, params);
            rl.distance = distance_loss(relit_inside, data_[i].outside_fixed);
            rl.distribution = distribution_loss(relit_inside, data_[i].outside_fixed, bins_);
            for (const PatchGroup& group : set.patches) {
                rl.texture = texture_of_group(group);
            }
            entries.push_back(std::move(rl));
        }
    } else {
        // pooled pixel losses on the single sample set
        const EdgeSampleSet& set = samples_.front();
        RegionLoss pooled;
        pooled.region_id = set.region_id;
        PixelSet relit_inside = relight_set(data_.front().inside, params);
        pooled.distance = distance_loss(relit_inside, data_.front().outside_fixed);
        pooled.distribution =
            distribution_loss(relit_inside, data_.front().outside_fixed, bins_);
        entries.push_back(std::move(pooled));
        if (variant_ == LossVariant::PixelsAndPatches) {
            for (const PatchGroup& group : set.patches) {
                if (auto t = texture_of_group(group)) {
                    RegionLoss rl;
                    rl.region_id = group.region_id;
                    rl.texture = t;
                    entries.push_back(std::move(rl));
                }
            }
        }
    }

    // The relight has no support outside the mask, so the non-shadow MSE is
    // identically zero for this model; it stays in the report for plugins
    // that do touch non-shadow pixels.
    return total_loss(entries, 0.0, weights_);
}

// --- optimizer ---------------------------------------------------------------

namespace {

// Search coordinates per target: three gains and three relit means
// (m = gain * inside_mean + offset). The gain/offset parameterization has a
// narrow diagonal valley -- the offset absorbs any mean shift a gain change
// causes -- which stalls descent steps; in gain/mean coordinates the valley
// is axis-aligned, so gain moves no longer disturb a matched mean.
struct ParamPacking {
    RelightMode mode;
    std::vector<int> region_ids;                       // targets in PerRegion mode
    std::vector<std::array<double, 3>> base_means;     // inside-color mean per target

    std::size_t size() const {
        return mode == RelightMode::Global ? 6 : 6 * region_ids.size();
    }

    std::vector<double> pack(const RelightParams& params) const {
        std::vector<double> x;
        x.reserve(size());
        std::size_t target = 0;
        auto push = [&](const ChannelAffine& a) {
            for (double g : a.gain) x.push_back(g);
            for (int i = 0; i < 3; ++i) {
                x.push_back(a.gain[i] * base_means[target][i] + a.offset[i]);
            }
            ++target;
        };
        if (mode == RelightMode::Global) {
            push(params.global);
        } else {
            for (int id : region_ids) push(affine_for_region(params, id));
        }
        return x;
    }

    RelightParams unpack(const std::vector<double>& x) const {
        RelightParams params;
        auto read = [&](std::size_t target) {
            ChannelAffine a;
            std::size_t base = 6 * target;
            for (int i = 0; i < 3; ++i) {
                a.gain[i] = x[base + i];
                a.offset[i] = x[base + 3 + i] - a.gain[i] * base_means[target][i];
            }
            return a;
        };
        if (mode == RelightMode::Global) {
            params.global = read(0);
        } else {
            for (std::size_t t = 0; t < region_ids.size(); ++t) {
                params.per_region[region_ids[t]] = read(t);
            }
        }
        return params;
    }

    void project(std::vector<double>& x, const RefineConfig& cfg) const {
        for (std::size_t target = 0; 6 * target + 5 < x.size(); ++target) {
            std::size_t base = 6 * target;
            for (int i = 0; i < 3; ++i) {
                double& gain = x[base + i];
                double& mean = x[base + 3 + i];
                gain = std::clamp(gain, 1.0, cfg.gain_max);
                double anchor = gain * base_means[target][i];
                mean = std::clamp(mean, anchor - cfg.offset_max, anchor + cfg.offset_max);
            }
        }
    }
};

}  // namespace

RefineResult optimize(const RgbImage& input, const BinaryMask& shadow,
                      const LabelMap& labels, const RefineConfig& cfg) {
    if (cfg.max_iters < 0 || cfg.step <= 0.0 || cfg.fd_step <= 0.0) {
        throw Error("optimize: step sizes must be positive");
    }
    SampleMode sample_mode = cfg.variant == LossVariant::PerMask ? SampleMode::PerRegion
                                                                 : SampleMode::Pooled;
    std::vector<MaterialRegion> regions = extract_regions(labels, shadow, cfg.sampler);
    std::vector<EdgeSampleSet> samples =
        build_sample_sets(input, labels, shadow, cfg.sampler, sample_mode);
    if (samples.empty()) {
        throw NoEdgesError();
    }
    ObjectiveContext ctx(shadow, regions, samples, cfg);

    ParamPacking packing;
    packing.mode = cfg.mode;
    if (cfg.mode == RelightMode::PerRegion) {
        for (const MaterialRegion& region : regions) {
            packing.region_ids.push_back(region.segment_id);
            packing.base_means.push_back(ctx.inside_mean(region.segment_id));
        }
    } else {
        packing.base_means.push_back(ctx.inside_mean());
    }

    std::vector<double> x = packing.pack(RelightParams{});  // identity start
    auto loss_of = [&](const std::vector<double>& v) {
        LossReport report = ctx.evaluate(packing.unpack(v));
        if (!std::isfinite(report.total)) {
            throw Error("optimize: non-finite loss (corrupt input?)");
        }
        return report;
    };

    RefineResult result;
    result.loss_trace.push_back(loss_of(x));
    std::vector<double> best_x = x;
    double best_loss = result.loss_trace.front().total;

    // One iteration is a cyclic pattern-search sweep: every coordinate is
    // probed on a two-sided geometric ladder of offsets (multiples of
    // cfg.step up and down, floored by fd_step) and takes the first
    // improving rung, followed by an acceleration probe along the sweep's
    // net displacement. The sampled losses are piecewise flat with
    // nearest-match re-assignments, which gives plain finite-difference
    // descent two measured failure modes: a diagonal gain/offset valley it
    // zigzags across, and spurious minima where a collapsed gain matches
    // the mean through the offset alone. The ladder's long rungs step
    // across both.
    std::vector<double> offsets;
    for (double t = cfg.step * 64.0; t >= cfg.step * 0.25; t *= 0.5) offsets.push_back(t);
    for (double t = cfg.step * 0.125; t >= cfg.fd_step; t *= 0.25) offsets.push_back(t);

    std::vector<double> trial_x(x.size());
    LossReport current = result.loss_trace.front();

    auto try_point = [&](LossReport& incumbent) {
        packing.project(trial_x, cfg);
        LossReport candidate = loss_of(trial_x);
        if (candidate.total < incumbent.total) {
            x = trial_x;
            incumbent = candidate;
            return true;
        }
        return false;
    };

    int it = 0;
    for (; it < cfg.max_iters; ++it) {
        std::vector<double> sweep_start = x;
        for (std::size_t i = 0; i < x.size(); ++i) {
            for (double t : offsets) {
                trial_x = x;
                trial_x[i] = x[i] + t;
                bool moved = try_point(current);
                trial_x = x;
                trial_x[i] = x[i] - t;
                moved = try_point(current) || moved;
                if (moved) break;  // resume this coordinate at finer rungs next sweep
            }
        }

        // acceleration along the sweep displacement
        bool drifted = false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] != sweep_start[i]) drifted = true;
        }
        if (drifted) {
            for (double scale : {1.0, 2.0, 4.0, 8.0}) {
                for (std::size_t i = 0; i < x.size(); ++i) {
                    trial_x[i] = x[i] + scale * (x[i] - sweep_start[i]);
                }
                if (!try_point(current)) break;
            }
        }

        result.loss_trace.push_back(current);
        if (current.total < best_loss) {
            best_loss = current.total;
            best_x = x;
        }

        int window = cfg.convergence_window;
        if (static_cast<int>(result.loss_trace.size()) > window) {
            double prev =
                result.loss_trace[result.loss_trace.size() - 1 - window].total;
            double rel =
                std::abs(current.total - prev) / std::max(std::abs(prev), 1e-12);
            if (rel < cfg.convergence_tol) {
                result.converged = true;
                ++it;
                break;
            }
        }
    }
    result.iterations_run = it;

    RelightParams best = packing.unpack(best_x);
    if (cfg.mode == RelightMode::PerRegion && !best.per_region.empty()) {
        // Shadow pixels in no qualifying region carry no supervision; render
        // them with the mean of the fitted region corrections.
        ChannelAffine mean;
        mean.gain = {0.0, 0.0, 0.0};
        for (const auto& [id, a] : best.per_region) {
            for (int i = 0; i < 3; ++i) {
                mean.gain[i] += a.gain[i];
                mean.offset[i] += a.offset[i];
            }
        }
        for (int i = 0; i < 3; ++i) {
            mean.gain[i] /= static_cast<double>(best.per_region.size());
            mean.offset[i] /= static_cast<double>(best.per_region.size());
        }
        best.global = mean;
    }
    result.params = best;
    result.output = apply_relight(input, shadow, regions, best, cfg.blend_width);

    PixelSet before_in = gather_colors(input, ctx.pooled_inside());
    PixelSet before_out = gather_colors(input, ctx.pooled_outside());
    PixelSet after_in = gather_colors(result.output, ctx.pooled_inside());
    PixelSet after_out = gather_colors(result.output, ctx.pooled_outside());
    result.cdd_before = cdd(before_in, before_out, cfg.bins);
    result.cdd_after = cdd(after_in, after_out, cfg.bins);
    return result;
}

RgbImage synth_shadow(const RgbImage& input, const BinaryMask& mask,
                      std::array<double, 3> dark_gain, std::array<double, 3> dark_offset,
                      int penumbra, double noise_sd, std::uint64_t seed) {
    if (input.height() != mask.height() || input.width() != mask.width()) {
        throw Error("synth_shadow: dimension mismatch");
    }
    for (double g : dark_gain) {
        if (!(g > 0.0 && g <= 1.0)) {
            throw Error("synth_shadow: dark gains must be in (0,1]");
        }
    }
    ChannelAffine affine;
    affine.gain = dark_gain;
    affine.offset = dark_offset;
    std::vector<float> alpha = blend_alpha(mask, penumbra);

    RgbImage out(input.height(), input.width());
    for (int r = 0; r < input.height(); ++r) {
        for (int c = 0; c < input.width(); ++c) {
            std::size_t i = static_cast<std::size_t>(r) * input.width() + c;
            out.set_pixel(r, c, affine_blend(input.pixel(r, c), affine, alpha[i]));
        }
    }
    if (noise_sd > 0.0) {
        Rng rng(seed);
        std::vector<float>& data = out.data();
        for (float& v : data) {
            v = clamp01(v + noise_sd * rng.normal());
        }
    }
    return out;
}

}  // namespace umbra
