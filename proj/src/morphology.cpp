#include "umbra/morphology.hpp"

#include <cmath>
#include <limits>

namespace umbra {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate(const StructuringElement& se) {
    if (se.radius < 1 || se.iterations < 1) {
        throw Error("structuring element needs radius >= 1 and iterations >= 1");
    }
}

// One pass of a separable square min/max filter. The square window
// decomposes exactly into a horizontal and a vertical run; out-of-bounds
// pixels count as background for both operators.
template <bool Erode>
BinaryMask apply_once(const BinaryMask& mask, int radius) {
    const int h = mask.height();
    const int w = mask.width();
    BinaryMask horiz(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            bool acc = Erode;
            for (int dc = -radius; dc <= radius; ++dc) {
                int cc = c + dc;
                bool v = (cc >= 0 && cc < w) ? mask.get(r, cc) : false;
                if constexpr (Erode) {
                    acc = acc && v;
                    if (!acc) break;
                } else {
                    acc = acc || v;
                    if (acc) break;
                }
            }
            horiz.set(r, c, acc);
        }
    }
    BinaryMask out(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            bool acc = Erode;
            for (int dr = -radius; dr <= radius; ++dr) {
                int rr = r + dr;
                bool v = (rr >= 0 && rr < h) ? horiz.get(rr, c) : false;
                if constexpr (Erode) {
                    acc = acc && v;
                    if (!acc) break;
                } else {
                    acc = acc || v;
                    if (acc) break;
                }
            }
            out.set(r, c, acc);
        }
    }
    return out;
}

// 1-D squared distance transform over the lower envelope of parabolas
// (Felzenszwalb & Huttenlocher). Sites with f = inf carry no parabola; if
// every site is absent the whole row stays inf.
void edt_1d(const std::vector<double>& f, int n, std::vector<double>& d,
            std::vector<int>& v, std::vector<double>& z) {
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        double s = 0.0;
        while (k >= 0) {
            s = ((f[q] + static_cast<double>(q) * q) -
                 (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        if (k < 0) {
            k = 0;
            v[0] = q;
            z[0] = -kInf;
        } else {
            ++k;
            v[k] = q;
            z[k] = s;
        }
        z[k + 1] = kInf;
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q) d[q] = kInf;
        return;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

}  // namespace

BinaryMask erode(const BinaryMask& mask, const StructuringElement& se) {
    validate(se);
    BinaryMask out = mask;
    for (int i = 0; i < se.iterations; ++i) {
        out = apply_once<true>(out, se.radius);
    }
    return out;
}

BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se) {
    validate(se);
    BinaryMask out = mask;
    for (int i = 0; i < se.iterations; ++i) {
        out = apply_once<false>(out, se.radius);
    }
    return out;
}

BinaryMask inner_band(const BinaryMask& mask, const StructuringElement& se) {
    BinaryMask eroded = erode(mask, se);
    BinaryMask out(mask.height(), mask.width());
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            out.set(r, c, mask.get(r, c) && !eroded.get(r, c));
        }
    }
    return out;
}

BinaryMask outer_band(const BinaryMask& mask, const StructuringElement& se) {
    BinaryMask dilated = dilate(mask, se);
    BinaryMask out(mask.height(), mask.width());
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            out.set(r, c, dilated.get(r, c) && !mask.get(r, c));
        }
    }
    return out;
}

std::vector<float> distance_to_background(const BinaryMask& mask) {
    const int h = mask.height();
    const int w = mask.width();

    // squared distances; column pass then row pass
    std::vector<double> grid(static_cast<std::size_t>(h) * w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            grid[static_cast<std::size_t>(r) * w + c] = mask.get(r, c) ? kInf : 0.0;
        }
    }

    const int n = std::max(h, w);
    std::vector<double> f(n), d(n), z(static_cast<std::size_t>(n) + 1);
    std::vector<int> v(n);

    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) f[r] = grid[static_cast<std::size_t>(r) * w + c];
        edt_1d(f, h, d, v, z);
        for (int r = 0; r < h; ++r) grid[static_cast<std::size_t>(r) * w + c] = d[r];
    }
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) f[c] = grid[static_cast<std::size_t>(r) * w + c];
        edt_1d(f, w, d, v, z);
        for (int c = 0; c < w; ++c) grid[static_cast<std::size_t>(r) * w + c] = d[c];
    }

    std::vector<float> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out[i] = grid[i] == kInf ? std::numeric_limits<float>::infinity()
                                 : static_cast<float>(std::sqrt(grid[i]));
    }
    return out;
}

}  // namespace umbra
