#pragma once

#include <filesystem>

#include "umbra/image.hpp"

namespace umbra {

/// Decodes an 8- or 16-bit PNG or JPEG into unit-range floats. Palette and
/// grayscale images are expanded to RGB; alpha is discarded. Channel values
/// are scaled by the bit-depth maximum (255 or 65535).
RgbImage load_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG; values are clamped to [0,1] and rounded to the
/// nearest of 256 levels. load_image(save_image(img)) is bit-exact for
/// images whose channels sit on the 8-bit grid.
void save_image(const RgbImage& image, const std::filesystem::path& path);

/// Loads any decodable raster and thresholds per-pixel luminance: a pixel is
/// true iff mean(r,g,b) > threshold.
BinaryMask load_mask(const std::filesystem::path& path, double threshold = 0.5);

struct LabelMapLoad {
    LabelMap labels;
    /// In directory mode, the number of pixels claimed by more than one mask
    /// file (the later id wins). Always 0 in single-file mode.
    long overlap_count = 0;
};

/// Loads a segmentation label map from either
///   (a) a single indexed or grayscale PNG whose raw pixel value is the
///       segment id, or
///   (b) a directory of binary mask PNGs named seg_<id>.png, applied in
///       ascending id order so that later ids overwrite earlier ones.
LabelMapLoad load_labelmap(const std::filesystem::path& source);

}  // namespace umbra
