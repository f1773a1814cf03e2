#pragma once

// Test-side reference implementations and fixtures. These stay independent
// of the library code they check: morphology by direct window scans, EMD by
// greedy mass transport, distances by explicit enumeration.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "umbra/image.hpp"

namespace oracle {

inline umbra::BinaryMask erode_naive(const umbra::BinaryMask& mask, int radius,
                                     int iterations) {
    umbra::BinaryMask cur = mask;
    for (int it = 0; it < iterations; ++it) {
        umbra::BinaryMask next(cur.height(), cur.width());
        for (int r = 0; r < cur.height(); ++r) {
            for (int c = 0; c < cur.width(); ++c) {
                bool all = true;
                for (int dr = -radius; dr <= radius && all; ++dr) {
                    for (int dc = -radius; dc <= radius && all; ++dc) {
                        int rr = r + dr, cc = c + dc;
                        bool v = rr >= 0 && rr < cur.height() && cc >= 0 &&
                                 cc < cur.width() && cur.get(rr, cc);
                        if (!v) all = false;
                    }
                }
                next.set(r, c, all);
            }
        }
        cur = next;
    }
    return cur;
}

inline umbra::BinaryMask dilate_naive(const umbra::BinaryMask& mask, int radius,
                                      int iterations) {
    umbra::BinaryMask cur = mask;
    for (int it = 0; it < iterations; ++it) {
        umbra::BinaryMask next(cur.height(), cur.width());
        for (int r = 0; r < cur.height(); ++r) {
            for (int c = 0; c < cur.width(); ++c) {
                bool any = false;
                for (int dr = -radius; dr <= radius && !any; ++dr) {
                    for (int dc = -radius; dc <= radius && !any; ++dc) {
                        int rr = r + dr, cc = c + dc;
                        if (rr >= 0 && rr < cur.height() && cc >= 0 && cc < cur.width() &&
                            cur.get(rr, cc)) {
                            any = true;
                        }
                    }
                }
                next.set(r, c, any);
            }
        }
        cur = next;
    }
    return cur;
}

/// Optimal 1-D transport with ground distance |i-j|/B via greedy matching of
/// sorted mass (optimal in 1-D).
inline double transport_emd(std::vector<double> a, std::vector<double> b) {
    const int bins = static_cast<int>(a.size());
    double cost = 0.0;
    int i = 0, j = 0;
    while (i < bins && j < bins) {
        if (a[i] <= 1e-15) {
            ++i;
            continue;
        }
        if (b[j] <= 1e-15) {
            ++j;
            continue;
        }
        double moved = std::min(a[i], b[j]);
        cost += moved * std::abs(i - j) / static_cast<double>(bins);
        a[i] -= moved;
        b[j] -= moved;
    }
    return cost;
}

inline std::vector<double> edt_brute(const umbra::BinaryMask& mask) {
    std::vector<double> out(static_cast<std::size_t>(mask.height()) * mask.width(),
                            std::numeric_limits<double>::infinity());
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            double best = std::numeric_limits<double>::infinity();
            for (int rr = 0; rr < mask.height(); ++rr) {
                for (int cc = 0; cc < mask.width(); ++cc) {
                    if (mask.get(rr, cc)) continue;
                    double dr = r - rr, dc = c - cc;
                    best = std::min(best, dr * dr + dc * dc);
                }
            }
            out[static_cast<std::size_t>(r) * mask.width() + c] = std::sqrt(best);
        }
    }
    return out;
}

inline umbra::BinaryMask random_mask(int h, int w, double p_true, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    umbra::BinaryMask mask(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double u = (rng() >> 11) * 0x1.0p-53;
            mask.set(r, c, u < p_true);
        }
    }
    return mask;
}

inline std::vector<double> random_histogram(int bins, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> h(bins);
    double sum = 0.0;
    for (double& v : h) {
        v = (rng() >> 11) * 0x1.0p-53 + 1e-6;
        sum += v;
    }
    for (double& v : h) v /= sum;
    return h;
}

// --- fixtures ---------------------------------------------------------------

/// Stationary iid texture over a small palette of RGB triples. Per channel
/// the palette values form an even grid over [base-amp, base+amp] (each
/// channel independently permuted), so every channel carries the same
/// spread; the finite color set means both sides of any edge see exact
/// joint-color matches, keeping edge losses at the sampling-noise floor on
/// shadow-free inputs.
inline umbra::RgbImage palette_texture(int h, int w, std::uint64_t seed,
                                       int palette_size = 16, float base = 0.55f,
                                       float amp = 0.12f) {
    std::mt19937_64 rng(seed);
    std::array<std::vector<float>, 3> levels;
    for (auto& ch : levels) {
        ch.resize(palette_size);
        for (int k = 0; k < palette_size; ++k) {
            ch[k] = base + amp * (2.0f * k / (palette_size - 1) - 1.0f);
        }
        for (std::size_t i = ch.size(); i > 1; --i) {
            std::swap(ch[i - 1], ch[rng() % i]);
        }
    }
    umbra::RgbImage img(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            auto k = rng() % static_cast<std::uint64_t>(palette_size);
            img.set_pixel(r, c, {levels[0][k], levels[1][k], levels[2][k]});
        }
    }
    return img;
}

inline umbra::BinaryMask left_half_mask(int h, int w) {
    umbra::BinaryMask m(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w / 2; ++c) m.set(r, c, true);
    }
    return m;
}

inline umbra::BinaryMask disk_mask(int h, int w, int center_row, int center_col,
                                   int radius) {
    umbra::BinaryMask m(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double dr = r - center_row, dc = c - center_col;
            m.set(r, c, dr * dr + dc * dc <= static_cast<double>(radius) * radius);
        }
    }
    return m;
}

inline umbra::PixelSet random_pixel_set(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    umbra::PixelSet set;
    for (int i = 0; i < n; ++i) {
        set.coords.push_back({i, 0});
        auto u = [&] { return static_cast<float>((rng() >> 11) * 0x1.0p-53); };
        set.colors.push_back({u(), u(), u()});
    }
    return set;
}

}  // namespace oracle
