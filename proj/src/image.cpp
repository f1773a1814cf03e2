#include "umbra/image.hpp"

#include <algorithm>
#include <cmath>

namespace umbra {

RgbImage::RgbImage(int height, int width, Rgb fill) : height_(height), width_(width) {
    if (height < 1 || width < 1) {
        throw Error("RgbImage dimensions must be at least 1x1");
    }
    data_.resize(static_cast<std::size_t>(height) * width * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
    }
}

void RgbImage::validate_unit_range() const {
    for (float v : data_) {
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
            throw Error("image channel value outside [0,1]: " + std::to_string(v));
        }
    }
}

BinaryMask::BinaryMask(int height, int width, bool fill) : height_(height), width_(width) {
    if (height < 1 || width < 1) {
        throw Error("BinaryMask dimensions must be at least 1x1");
    }
    data_.assign(static_cast<std::size_t>(height) * width, fill ? 1 : 0);
}

long BinaryMask::count_true() const {
    long n = 0;
    for (std::uint8_t v : data_) n += v;
    return n;
}

LabelMap::LabelMap(int height, int width, int fill) : height_(height), width_(width) {
    if (height < 1 || width < 1) {
        throw Error("LabelMap dimensions must be at least 1x1");
    }
    data_.assign(static_cast<std::size_t>(height) * width, fill);
}

std::vector<int> LabelMap::segment_ids() const {
    std::vector<int> ids(data_);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::erase_if(ids, [](int id) { return id <= 0; });
    return ids;
}

PixelSet gather_colors(const RgbImage& image, const std::vector<Coord>& coords) {
    PixelSet out;
    out.coords = coords;
    out.colors.reserve(coords.size());
    for (const Coord& c : coords) {
        if (!image.in_bounds(c.row, c.col)) {
            throw Error("gather_colors: coordinate (" + std::to_string(c.row) + "," +
                        std::to_string(c.col) + ") out of bounds");
        }
        out.colors.push_back(image.pixel(c.row, c.col));
    }
    return out;
}

Patch extract_patch(const RgbImage& image, Coord top_left, int size) {
    if (size < 1 || !image.in_bounds(top_left.row, top_left.col) ||
        !image.in_bounds(top_left.row + size - 1, top_left.col + size - 1)) {
        throw Error("extract_patch: footprint out of bounds");
    }
    Patch p;
    p.top_left = top_left;
    p.size = size;
    p.pixels.resize(static_cast<std::size_t>(size) * size * 3);
    std::size_t k = 0;
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            Rgb px = image.pixel(top_left.row + r, top_left.col + c);
            p.pixels[k++] = px.r;
            p.pixels[k++] = px.g;
            p.pixels[k++] = px.b;
        }
    }
    return p;
}

}  // namespace umbra
