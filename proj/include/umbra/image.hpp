#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace umbra {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct Coord {
    int row = 0;
    int col = 0;
    friend bool operator==(const Coord&, const Coord&) = default;
    friend auto operator<=>(const Coord&, const Coord&) = default;
};

struct Rgb {
    float r = 0.0f;
    float g = 0.0f;
    float b = 0.0f;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Mean of the three channels, the grayscale value used for mask thresholding
/// and patch gradients.
inline double luminance(const Rgb& c) {
    return (static_cast<double>(c.r) + c.g + c.b) / 3.0;
}

/// H x W color image, row-major, three floats per pixel, values in [0,1].
class RgbImage {
public:
    RgbImage() = default;
    RgbImage(int height, int width, Rgb fill = {});

    int height() const { return height_; }
    int width() const { return width_; }
    bool empty() const { return height_ == 0 || width_ == 0; }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height_ && col >= 0 && col < width_;
    }

    Rgb pixel(int row, int col) const {
        const float* p = &data_[index(row, col)];
        return {p[0], p[1], p[2]};
    }
    void set_pixel(int row, int col, const Rgb& c) {
        float* p = &data_[index(row, col)];
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }
    float channel(int row, int col, int ch) const { return data_[index(row, col) + ch]; }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    /// Throws if any channel value is non-finite or outside [0,1].
    void validate_unit_range() const;

private:
    std::size_t index(int row, int col) const {
        return (static_cast<std::size_t>(row) * width_ + col) * 3;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<float> data_;
};

/// Per-pixel boolean map; true marks shadow (or foreground, depending on use).
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int height, int width, bool fill = false);

    int height() const { return height_; }
    int width() const { return width_; }
    bool empty() const { return height_ == 0 || width_ == 0; }
    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height_ && col >= 0 && col < width_;
    }

    bool get(int row, int col) const { return data_[index(row, col)] != 0; }
    void set(int row, int col, bool v) { data_[index(row, col)] = v ? 1 : 0; }

    long count_true() const;
    bool same_size(const BinaryMask& other) const {
        return height_ == other.height_ && width_ == other.width_;
    }

    const std::vector<std::uint8_t>& data() const { return data_; }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * width_ + col;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Per-pixel segment id. Id 0 is reserved for unlabeled pixels and never
/// forms a material region.
class LabelMap {
public:
    LabelMap() = default;
    LabelMap(int height, int width, int fill = 0);

    int height() const { return height_; }
    int width() const { return width_; }
    bool empty() const { return height_ == 0 || width_ == 0; }

    int get(int row, int col) const { return data_[index(row, col)]; }
    void set(int row, int col, int id) { data_[index(row, col)] = id; }

    /// Distinct nonzero ids present, ascending.
    std::vector<int> segment_ids() const;

    const std::vector<int>& data() const { return data_; }

private:
    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * width_ + col;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<int> data_;
};

/// Parallel lists of coordinates and the colors read at them.
struct PixelSet {
    std::vector<Coord> coords;
    std::vector<Rgb> colors;

    std::size_t size() const { return coords.size(); }
    bool empty() const { return coords.empty(); }
};

/// Square block of image pixels, fully inside the image it was cut from.
struct Patch {
    Coord top_left;
    int size = 0;
    std::vector<float> pixels;  // size*size*3, row-major

    Rgb pixel(int row, int col) const {
        const float* p = &pixels[(static_cast<std::size_t>(row) * size + col) * 3];
        return {p[0], p[1], p[2]};
    }
};

/// Reads colors at the given coordinates, in coordinate order.
/// Throws on any out-of-bounds coordinate.
PixelSet gather_colors(const RgbImage& image, const std::vector<Coord>& coords);

/// Cuts one patch out of the image; the footprint must be fully in bounds.
Patch extract_patch(const RgbImage& image, Coord top_left, int size);

}  // namespace umbra
