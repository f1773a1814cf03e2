#pragma once

#include <vector>

#include "umbra/image.hpp"

namespace umbra {

/// Square (2*radius+1)^2 window applied `iterations` times.
struct StructuringElement {
    int radius = 1;
    int iterations = 1;
};

/// Pixel stays true iff every window pixel is true. Out-of-bounds pixels
/// count as false, so foreground touching the border is eaten.
BinaryMask erode(const BinaryMask& mask, const StructuringElement& se);

/// Pixel becomes true iff any window pixel is true; out-of-bounds is false.
BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se);

/// mask AND NOT erode(mask): the ring just inside the mask boundary.
BinaryMask inner_band(const BinaryMask& mask, const StructuringElement& se);

/// dilate(mask) AND NOT mask: the ring just outside the mask boundary.
BinaryMask outer_band(const BinaryMask& mask, const StructuringElement& se);

/// Exact Euclidean distance from each pixel to the nearest false pixel
/// (0 on false pixels, +inf if the mask is all true). Row-major floats.
std::vector<float> distance_to_background(const BinaryMask& mask);

}  // namespace umbra
