#include "umbra/mc_edges.hpp"

#include <algorithm>
#include <map>

#include "umbra/rng.hpp"

namespace umbra {
namespace {

void require_same_size(int h1, int w1, int h2, int w2, const char* what) {
    if (h1 != h2 || w1 != w2) {
        throw Error(std::string(what) + ": dimension mismatch");
    }
}

// Summed-area table of a boolean predicate, for O(1) "is this whole square
// true" footprint queries.
class BlockSum {
public:
    template <typename Pred>
    BlockSum(int h, int w, Pred&& pred) : w_(w), sums_((h + 1) * static_cast<std::size_t>(w + 1)) {
        for (int r = 0; r < h; ++r) {
            for (int c = 0; c < w; ++c) {
                sums_[at(r + 1, c + 1)] = (pred(r, c) ? 1 : 0) + sums_[at(r, c + 1)] +
                                          sums_[at(r + 1, c)] - sums_[at(r, c)];
            }
        }
    }

    bool full(int row, int col, int size) const {
        long s = sums_[at(row + size, col + size)] - sums_[at(row, col + size)] -
                 sums_[at(row + size, col)] + sums_[at(row, col)];
        return s == static_cast<long>(size) * size;
    }

private:
    std::size_t at(int r, int c) const { return static_cast<std::size_t>(r) * (w_ + 1) + c; }
    int w_;
    std::vector<long> sums_;
};

std::vector<Coord> band_coords_in_region(const BinaryMask& band, const BinaryMask& region) {
    std::vector<Coord> coords;
    for (int r = 0; r < band.height(); ++r) {
        for (int c = 0; c < band.width(); ++c) {
            if (band.get(r, c) && region.get(r, c)) coords.push_back({r, c});
        }
    }
    return coords;
}

std::vector<Patch> draw_patches(const RgbImage& image, const std::vector<Coord>& candidates,
                                int count, int size, Rng& rng) {
    std::vector<Coord> pool = candidates;
    const int take = std::min<int>(count, static_cast<int>(pool.size()));
    std::vector<Patch> patches;
    patches.reserve(take);
    for (int i = 0; i < take; ++i) {
        std::size_t j = i + rng.bounded(pool.size() - i);
        std::swap(pool[i], pool[j]);
        patches.push_back(extract_patch(image, pool[i], size));
    }
    return patches;
}

std::pair<PixelSet, PixelSet> edge_pixels_from_bands(const RgbImage& image,
                                                     const MaterialRegion& region,
                                                     const ShadowBands& bands) {
    std::vector<Coord> in_coords = band_coords_in_region(bands.inner, region.mask);
    std::vector<Coord> out_coords = band_coords_in_region(bands.outer, region.mask);
    if (in_coords.empty() || out_coords.empty()) {
        throw Error("sample_edge_pixels: empty band side for segment " +
                    std::to_string(region.segment_id) + " (region was not qualified)");
    }
    return {gather_colors(image, in_coords), gather_colors(image, out_coords)};
}

}  // namespace

ShadowBands make_shadow_bands(const BinaryMask& shadow, const StructuringElement& se) {
    return {inner_band(shadow, se), outer_band(shadow, se)};
}

std::vector<MaterialRegion> extract_regions(const LabelMap& labels, const BinaryMask& shadow,
                                            const SamplerConfig& cfg) {
    require_same_size(labels.height(), labels.width(), shadow.height(), shadow.width(),
                      "extract_regions");
    if (cfg.tau_band < 1 || cfg.min_region_area < 0) {
        throw Error("extract_regions: tau_band >= 1 and min_region_area >= 0 required");
    }
    ShadowBands bands = make_shadow_bands(shadow, cfg.band_se);

    struct Counts {
        long area = 0;
        long in_band = 0;
        long out_band = 0;
    };
    std::map<int, Counts> counts;  // ordered -> deterministic region order by id
    for (int r = 0; r < labels.height(); ++r) {
        for (int c = 0; c < labels.width(); ++c) {
            int id = labels.get(r, c);
            if (id <= 0) continue;  // unlabeled pixels carry no material evidence
            Counts& k = counts[id];
            ++k.area;
            if (bands.inner.get(r, c)) ++k.in_band;
            if (bands.outer.get(r, c)) ++k.out_band;
        }
    }

    std::vector<MaterialRegion> regions;
    for (const auto& [id, k] : counts) {
        if (k.area < cfg.min_region_area) continue;
        if (k.in_band < cfg.tau_band || k.out_band < cfg.tau_band) continue;
        MaterialRegion region;
        region.segment_id = id;
        region.area = k.area;
        region.in_band_count = k.in_band;
        region.out_band_count = k.out_band;
        region.mask = BinaryMask(labels.height(), labels.width());
        regions.push_back(std::move(region));
    }
    if (regions.empty()) return regions;

    std::map<int, BinaryMask*> mask_of;
    for (MaterialRegion& region : regions) mask_of[region.segment_id] = &region.mask;
    for (int r = 0; r < labels.height(); ++r) {
        for (int c = 0; c < labels.width(); ++c) {
            auto it = mask_of.find(labels.get(r, c));
            if (it != mask_of.end()) it->second->set(r, c, true);
        }
    }
    return regions;
}

std::pair<PixelSet, PixelSet> sample_edge_pixels(const RgbImage& image,
                                                 const MaterialRegion& region,
                                                 const BinaryMask& shadow,
                                                 const SamplerConfig& cfg) {
    require_same_size(image.height(), image.width(), shadow.height(), shadow.width(),
                      "sample_edge_pixels");
    return edge_pixels_from_bands(image, region, make_shadow_bands(shadow, cfg.band_se));
}

std::pair<std::vector<Patch>, std::vector<Patch>> sample_patches(const RgbImage& image,
                                                                 const MaterialRegion& region,
                                                                 const BinaryMask& shadow,
                                                                 const SamplerConfig& cfg) {
    require_same_size(image.height(), image.width(), shadow.height(), shadow.width(),
                      "sample_patches");
    if (cfg.patch_size < 2 || cfg.patch_count < 1) {
        throw Error("sample_patches: patch_size >= 2 and patch_count >= 1 required");
    }
    const int h = image.height();
    const int w = image.width();
    BinaryMask eroded = erode(region.mask, cfg.material_erosion);

    BlockSum in_ok(h, w, [&](int r, int c) { return eroded.get(r, c) && shadow.get(r, c); });
    BlockSum out_ok(h, w, [&](int r, int c) { return eroded.get(r, c) && !shadow.get(r, c); });

    std::vector<Coord> in_candidates;
    std::vector<Coord> out_candidates;
    const int p = cfg.patch_size;
    for (int r = 0; r + p <= h; ++r) {
        for (int c = 0; c + p <= w; ++c) {
            if (in_ok.full(r, c, p)) in_candidates.push_back({r, c});
            if (out_ok.full(r, c, p)) out_candidates.push_back({r, c});
        }
    }

    Rng rng(cfg.rng_seed ^ static_cast<std::uint64_t>(region.segment_id));
    std::vector<Patch> inside = draw_patches(image, in_candidates, cfg.patch_count, p, rng);
    std::vector<Patch> outside = draw_patches(image, out_candidates, cfg.patch_count, p, rng);
    return {std::move(inside), std::move(outside)};
}

std::vector<EdgeSampleSet> build_sample_sets(const RgbImage& image, const LabelMap& labels,
                                             const BinaryMask& shadow,
                                             const SamplerConfig& cfg, SampleMode mode) {
    require_same_size(image.height(), image.width(), labels.height(), labels.width(),
                      "build_sample_sets");
    std::vector<MaterialRegion> regions = extract_regions(labels, shadow, cfg);
    if (regions.empty()) return {};

    ShadowBands bands = make_shadow_bands(shadow, cfg.band_se);
    std::vector<EdgeSampleSet> sets;
    if (mode == SampleMode::PerRegion) {
        sets.reserve(regions.size());
        for (const MaterialRegion& region : regions) {
            EdgeSampleSet set;
            set.region_id = region.segment_id;
            std::tie(set.inside, set.outside) = edge_pixels_from_bands(image, region, bands);
            auto [p_in, p_out] = sample_patches(image, region, shadow, cfg);
            set.patches.push_back({region.segment_id, std::move(p_in), std::move(p_out)});
            sets.push_back(std::move(set));
        }
        return sets;
    }

    EdgeSampleSet pooled;
    pooled.region_id = 0;
    for (const MaterialRegion& region : regions) {
        auto [in_px, out_px] = edge_pixels_from_bands(image, region, bands);
        pooled.inside.coords.insert(pooled.inside.coords.end(), in_px.coords.begin(),
                                    in_px.coords.end());
        pooled.inside.colors.insert(pooled.inside.colors.end(), in_px.colors.begin(),
                                    in_px.colors.end());
        pooled.outside.coords.insert(pooled.outside.coords.end(), out_px.coords.begin(),
                                     out_px.coords.end());
        pooled.outside.colors.insert(pooled.outside.colors.end(), out_px.colors.begin(),
                                     out_px.colors.end());
        auto [p_in, p_out] = sample_patches(image, region, shadow, cfg);
        pooled.patches.push_back({region.segment_id, std::move(p_in), std::move(p_out)});
    }
    sets.push_back(std::move(pooled));
    return sets;
}

}  // namespace umbra
