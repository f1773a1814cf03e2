#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "umbra/image.hpp"

namespace umbra {

/// Per-channel normalized histogram. Bin k covers [k/B, (k+1)/B), with the
/// last bin closed so 1.0 lands in bin B-1.
struct ColorHistogram {
    int bins = 0;
    std::array<std::vector<double>, 3> channels;
    bool empty_input = false;  // all-zero channels, rejected by EMD consumers

    static constexpr double kNormTolerance = 1e-9;
};

ColorHistogram histogram(const PixelSet& pixels, int bins);

/// 1-D Earth Mover's Distance between two normalized B-vectors with ground
/// distance |i-j|/B, evaluated through the CDF identity
///   EMD = (1/B) * sum_k |CDF_a(k) - CDF_b(k)|.
/// Results live in normalized intensity units: two point masses at opposite
/// ends of the range are (B-1)/B apart.
double emd_1d(std::span<const double> a, std::span<const double> b);

/// Mean of emd_1d over the R, G, B channels.
double channel_emd(const ColorHistogram& a, const ColorHistogram& b);

/// Mean over the first set of the minimum RGB Euclidean distance to any
/// pixel of the second set. Both sets must be nonempty.
double distance_loss(const PixelSet& inside, const PixelSet& outside);

/// channel_emd of the two color histograms.
double distribution_loss(const PixelSet& inside, const PixelSet& outside, int bins);

/// 14-component patch statistics: per-channel mean (3), per-channel
/// population standard deviation (3), and an 8-bin normalized histogram of
/// the luminance gradient magnitude. Gradients are forward differences with
/// the last row/column set to zero; magnitudes are binned over [0, sqrt(2)].
constexpr int kPatchDescriptorSize = 14;
std::array<double, kPatchDescriptorSize> patch_descriptor(const Patch& p);

/// Euclidean distance between the default descriptors of two patches.
double descriptor_distance(const Patch& a, const Patch& b);

/// Patch dissimilarity for texture_loss; replaceable by an external
/// perceptual scorer.
using PatchDistance = std::function<double(const Patch&, const Patch&)>;

/// Mean over inside patches of the minimum distance to any outside patch.
/// Uses descriptor_distance when no custom distance is given.
double texture_loss(std::span<const Patch> inside, std::span<const Patch> outside,
                    const PatchDistance& dist = {});

/// Mean squared error over the channels of all non-shadow pixels.
double nonshadow_loss(const RgbImage& output, const RgbImage& input,
                      const BinaryMask& shadow);

struct LossWeights {
    double distance = 1.0;
    double distribution = 1.0;
    double texture = 0.1;
    double nonshadow = 10.0;
};

/// Component losses for one material region; absent values mean the region
/// produced no valid samples for that term.
struct RegionLoss {
    int region_id = 0;
    std::optional<double> distance;
    std::optional<double> distribution;
    std::optional<double> texture;
};

struct LossReport {
    double distance = 0.0;      // averaged over regions that have the term
    double distribution = 0.0;
    double texture = 0.0;
    double nonshadow = 0.0;
    double total = 0.0;
    std::vector<RegionLoss> per_region;
};

/// Averages each component over the regions that carry it and forms the
/// weighted sum. Regions lacking patches contribute only to the pixel terms.
LossReport total_loss(const std::vector<RegionLoss>& region_losses, double nonshadow,
                      const LossWeights& weights);

/// Color Distribution Difference: channel_emd of the histograms of the
/// shadow-side and non-shadow-side annotation pixels. Raw value; reports
/// multiply by 1000.
double cdd(const PixelSet& shadow_side, const PixelSet& nonshadow_side, int bins);

struct CddAggregate {
    double mean_x1000 = 0.0;
    double var_x1000 = 0.0;  // population variance
};

/// Mean and population variance of raw CDD values, both scaled by 1000.
CddAggregate cdd_aggregate(const std::vector<double>& raw_values);

}  // namespace umbra
