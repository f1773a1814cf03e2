#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "umbra/image.hpp"
#include "umbra/mc_edges.hpp"
#include "umbra/metrics.hpp"

namespace umbra {

/// Per-channel affine correction out = gain * in + offset, applied inside
/// the shadow mask. Gains are boxed to [1, gain_max] (removal brightens),
/// offsets to [-offset_max, offset_max].
struct ChannelAffine {
    std::array<double, 3> gain{1.0, 1.0, 1.0};
    std::array<double, 3> offset{0.0, 0.0, 0.0};
    friend bool operator==(const ChannelAffine&, const ChannelAffine&) = default;
};

struct RelightParams {
    ChannelAffine global;
    std::map<int, ChannelAffine> per_region;  // keyed by segment id; empty in global mode
    friend bool operator==(const RelightParams&, const RelightParams&) = default;
};

enum class RelightMode { Global, PerRegion };

/// Thrown by optimize when no segment straddles the shadow boundary; batch
/// callers copy the input through instead of aborting.
class NoEdgesError : public Error {
public:
    NoEdgesError() : Error("no material-consistent shadow edge found") {}
};

/// Which loss terms drive the adaptation.
enum class LossVariant {
    PerMask,           // all losses computed per region, then averaged
    Pixels,            // pooled pixel losses only
    PixelsAndPatches,  // pooled pixel losses plus per-region texture loss
};

struct RefineConfig {
    SamplerConfig sampler;
    LossWeights weights;
    RelightMode mode = RelightMode::Global;
    LossVariant variant = LossVariant::PixelsAndPatches;
    int max_iters = 200;
    double step = 0.05;    // base parameter probe quantum
    double fd_step = 1e-3; // finest probe offset
    int blend_width = 5;
    double convergence_tol = 1e-6;  // relative loss change over convergence_window iters
    int convergence_window = 10;
    double gain_max = 8.0;
    double offset_max = 0.5;
    int bins = 256;
};

struct RefineResult {
    RgbImage output;
    RelightParams params;
    std::vector<LossReport> loss_trace;  // entry 0 is the initial iterate
    double cdd_before = 0.0;             // raw, on the pooled edge bands
    double cdd_after = 0.0;
    int iterations_run = 0;
    bool converged = false;
};

/// Blend weight per pixel: 0 outside the mask, ramping linearly with the
/// Euclidean distance to the mask boundary up to 1 at blend_width pixels
/// deep. blend_width 0 gives a hard 0/1 mask.
std::vector<float> blend_alpha(const BinaryMask& mask, int blend_width);

/// Forward pass of the parametric relighting model: per pixel,
/// out = alpha * clamp01(gain * in + offset) + (1 - alpha) * in, with the
/// affine taken from the pixel's region when present, else params.global.
/// Pixels outside the mask are copied bit-identically.
RgbImage apply_relight(const RgbImage& input, const BinaryMask& shadow,
                       std::span<const MaterialRegion> regions,
                       const RelightParams& params, int blend_width);

/// Everything the objective needs besides the parameters. Sample coordinates
/// and the colors behind them are fixed at construction; each evaluation
/// relights the sampled colors exactly as apply_relight would, so reading
/// from a fully relit image gives bit-identical losses.
class ObjectiveContext {
public:
    ObjectiveContext(const BinaryMask& shadow, std::vector<MaterialRegion> regions,
                     std::vector<EdgeSampleSet> samples, const RefineConfig& cfg);
    ~ObjectiveContext();
    ObjectiveContext(ObjectiveContext&&) noexcept;

    LossReport evaluate(const RelightParams& params) const;

    const std::vector<MaterialRegion>& regions() const { return regions_; }
    const std::vector<EdgeSampleSet>& samples() const { return samples_; }

    /// Pooled inside/outside coordinates of all sample sets, for CDD.
    const std::vector<Coord>& pooled_inside() const { return pooled_inside_; }
    const std::vector<Coord>& pooled_outside() const { return pooled_outside_; }

    /// Per-channel mean of the inside sample colors, pooled or per region
    /// (falls back to the pooled mean for unknown ids). The optimizer uses
    /// these to search in gain/relit-mean coordinates.
    std::array<double, 3> inside_mean() const { return pooled_mean_; }
    std::array<double, 3> inside_mean(int region_id) const;

private:
    struct RelitPixelSet;  // coords + region ids + input colors

    PixelSet relight_set(const RelitPixelSet& set, const RelightParams& params) const;
    Patch relight_patch(const Patch& original, int region_id,
                        const RelightParams& params) const;

    int width_;
    std::vector<MaterialRegion> regions_;
    std::vector<EdgeSampleSet> samples_;
    LossVariant variant_;
    LossWeights weights_;
    int bins_;
    std::vector<float> alpha_;

    struct SampleData;
    std::vector<SampleData> data_;  // one per sample set, mirrors samples_
    std::vector<Coord> pooled_inside_;
    std::vector<Coord> pooled_outside_;
    std::array<double, 3> pooled_mean_{};
    std::map<int, std::array<double, 3>> region_means_;
};

/// Projected descent on the relight parameters. Each iteration sweeps the
/// parameter coordinates with a two-sided geometric probe ladder (offsets
/// between 64*step and fd_step), accepts improving moves, projects into the
/// parameter boxes, and finishes with an acceleration probe along the
/// sweep's net displacement. The loss trace is non-increasing and the
/// best-loss iterate is returned. Throws when no material-consistent region
/// exists or the loss goes non-finite.
RefineResult optimize(const RgbImage& input, const BinaryMask& shadow,
                      const LabelMap& labels, const RefineConfig& cfg);

/// Test fixture generator: darkens the masked area with a per-channel affine
/// (gains in (0,1]), blends over `penumbra` pixels, then adds seeded Gaussian
/// noise. With penumbra and noise at zero this is the exact inverse pair of
/// apply_relight.
RgbImage synth_shadow(const RgbImage& input, const BinaryMask& mask,
                      std::array<double, 3> dark_gain, std::array<double, 3> dark_offset,
                      int penumbra, double noise_sd, std::uint64_t seed);

}  // namespace umbra
