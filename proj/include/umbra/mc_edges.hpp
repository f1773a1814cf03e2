#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "umbra/image.hpp"
#include "umbra/morphology.hpp"

namespace umbra {

struct SamplerConfig {
    StructuringElement band_se{1, 2};            // shadow-mask band extraction
    StructuringElement material_erosion{1, 2};   // safety margin before patch sampling
    long min_region_area = 500;
    long tau_band = 20;     // minimum band pixels required on each side
    int patch_count = 8;
    int patch_size = 16;
    std::uint64_t rng_seed = 0;
};

/// One segment of the label map together with its shadow-band overlap counts.
/// A region is material-consistent when both counts reach tau_band: its
/// segment then straddles the shadow boundary instead of stopping at it.
struct MaterialRegion {
    int segment_id = 0;
    BinaryMask mask;
    long area = 0;
    long in_band_count = 0;
    long out_band_count = 0;
};

/// Inner/outer shadow edge bands, computed once per image.
struct ShadowBands {
    BinaryMask inner;
    BinaryMask outer;
};

ShadowBands make_shadow_bands(const BinaryMask& shadow, const StructuringElement& se);

/// Returns the segments (ascending id) with area >= min_region_area whose
/// intersection with both shadow bands is at least tau_band pixels.
std::vector<MaterialRegion> extract_regions(const LabelMap& labels,
                                            const BinaryMask& shadow,
                                            const SamplerConfig& cfg);

/// All pixels of inner_band(shadow) and outer_band(shadow) that fall inside
/// the region mask, exhaustively, with colors read from `image`.
/// Returns (inside, outside).
std::pair<PixelSet, PixelSet> sample_edge_pixels(const RgbImage& image,
                                                 const MaterialRegion& region,
                                                 const BinaryMask& shadow,
                                                 const SamplerConfig& cfg);

/// Up to patch_count patches per side, drawn without replacement from the
/// top-left positions whose whole footprint lies inside the eroded region
/// mask intersected with the shadow (inside) or its complement (outside).
/// Sides with no valid position yield empty lists. The RNG is seeded with
/// cfg.rng_seed XOR segment_id so per-region results do not depend on
/// processing order. Returns (inside, outside).
std::pair<std::vector<Patch>, std::vector<Patch>> sample_patches(
    const RgbImage& image, const MaterialRegion& region, const BinaryMask& shadow,
    const SamplerConfig& cfg);

/// Patches of one material region; texture consistency is only meaningful
/// within a single material, so patches stay grouped even when pixel sets
/// are pooled.
struct PatchGroup {
    int region_id = 0;
    std::vector<Patch> inside;
    std::vector<Patch> outside;
};

/// The supervision signal extracted from one region (region_id > 0) or
/// pooled over all qualifying regions (region_id == 0).
struct EdgeSampleSet {
    int region_id = 0;
    PixelSet inside;   // pixels just inside the shadow boundary
    PixelSet outside;  // pixels just outside
    std::vector<PatchGroup> patches;
};

enum class SampleMode {
    PerRegion,  // one sample set per qualifying region
    Pooled,     // one set: pixel sets unioned, patches still grouped per region
};

/// Builds the full supervision signal. Returns an empty list when no region
/// qualifies; callers report "no material-consistent shadow edge found" and
/// skip refinement.
std::vector<EdgeSampleSet> build_sample_sets(const RgbImage& image,
                                             const LabelMap& labels,
                                             const BinaryMask& shadow,
                                             const SamplerConfig& cfg,
                                             SampleMode mode);

}  // namespace umbra
