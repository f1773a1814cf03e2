#include "umbra/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <map>
#include <memory>
#include <regex>

#include <jpeglib.h>
#include <png.h>

namespace umbra {
namespace {

namespace fs = std::filesystem;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) {
        throw Error("cannot open file: " + path.string());
    }
    return f;
}

enum class RasterFormat { Png, Jpeg, Unknown };

RasterFormat sniff_format(std::FILE* f) {
    unsigned char magic[8] = {};
    std::size_t n = std::fread(magic, 1, sizeof(magic), f);
    std::rewind(f);
    if (n >= 8 && png_sig_cmp(magic, 0, 8) == 0) return RasterFormat::Png;
    if (n >= 2 && magic[0] == 0xFF && magic[1] == 0xD8) return RasterFormat::Jpeg;
    return RasterFormat::Unknown;
}

// libpng reports errors through longjmp; the message is stashed here first.
void png_error_fn(png_structp png, png_const_charp msg) {
    auto* err = static_cast<std::string*>(png_get_error_ptr(png));
    if (err) *err = msg;
    longjmp(png_jmpbuf(png), 1);
}

void png_warn_fn(png_structp, png_const_charp) {}

struct DecodedRaster {
    int height = 0;
    int width = 0;
    int channels = 0;   // after transforms
    int bit_depth = 0;  // 8 or 16
    std::vector<unsigned char> bytes;  // rows, packed; 16-bit stays big-endian
};

// rgb == true expands palette/gray to RGB and strips alpha; rgb == false
// keeps raw single-channel sample values (palette indices / gray levels).
DecodedRaster decode_png(const fs::path& path, bool rgb) {
    FilePtr file = open_file(path, "rb");
    std::string err_msg;
    DecodedRaster out;
    std::vector<png_bytep> row_ptrs;

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, &err_msg, png_error_fn, png_warn_fn);
    if (!png) throw Error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("PNG decode failed (" + path.string() + "): " + err_msg);
    }

    png_init_io(png, file.get());
    png_read_info(png, info);

    png_uint_32 width = png_get_image_width(png, info);
    png_uint_32 height = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);
    if (width == 0 || height == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("zero-sized image: " + path.string());
    }

    if (rgb) {
        if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
            png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        png_set_strip_alpha(png);
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
    } else {
        if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_PALETTE) {
            png_destroy_read_struct(&png, &info, nullptr);
            throw Error("label map must be a grayscale or indexed PNG: " + path.string());
        }
        if (bit_depth < 8) png_set_packing(png);  // one sample per byte
    }
    png_read_update_info(png, info);

    out.height = static_cast<int>(height);
    out.width = static_cast<int>(width);
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);

    std::size_t row_bytes = png_get_rowbytes(png, info);
    out.bytes.resize(row_bytes * height);
    row_ptrs.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) {
        row_ptrs[r] = out.bytes.data() + row_bytes * r;
    }
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    longjmp(err->jump, 1);
}

DecodedRaster decode_jpeg(const fs::path& path) {
    FilePtr file = open_file(path, "rb");
    DecodedRaster out;
    jpeg_decompress_struct cinfo;
    JpegErrorMgr jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    jerr.message[0] = '\0';
    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error("JPEG decode failed (" + path.string() + "): " + jerr.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    out.height = static_cast<int>(cinfo.output_height);
    out.width = static_cast<int>(cinfo.output_width);
    out.channels = 3;
    out.bit_depth = 8;
    if (out.height == 0 || out.width == 0) {
        jpeg_destroy_decompress(&cinfo);
        throw Error("zero-sized image: " + path.string());
    }
    std::size_t row_bytes = static_cast<std::size_t>(out.width) * 3;
    out.bytes.resize(row_bytes * out.height);
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row = out.bytes.data() + row_bytes * cinfo.output_scanline;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

RgbImage raster_to_image(const DecodedRaster& raster, const fs::path& path) {
    if (raster.channels != 3) {
        throw Error("expected 3 channels after decode: " + path.string());
    }
    RgbImage img(raster.height, raster.width);
    std::vector<float>& data = img.data();
    const std::size_t n = static_cast<std::size_t>(raster.height) * raster.width * 3;
    if (raster.bit_depth == 8) {
        for (std::size_t i = 0; i < n; ++i) {
            data[i] = raster.bytes[i] / 255.0f;
        }
    } else if (raster.bit_depth == 16) {
        // PNG stores 16-bit samples big-endian.
        for (std::size_t i = 0; i < n; ++i) {
            unsigned v = (static_cast<unsigned>(raster.bytes[2 * i]) << 8) |
                         raster.bytes[2 * i + 1];
            data[i] = v / 65535.0f;
        }
    } else {
        throw Error("unsupported bit depth: " + std::to_string(raster.bit_depth));
    }
    return img;
}

LabelMap raster_to_labels(const DecodedRaster& raster, const fs::path& path) {
    if (raster.channels != 1) {
        throw Error("label map must be single-channel: " + path.string());
    }
    LabelMap labels(raster.height, raster.width);
    std::size_t i = 0;
    for (int r = 0; r < raster.height; ++r) {
        for (int c = 0; c < raster.width; ++c, ++i) {
            int id;
            if (raster.bit_depth == 16) {
                id = (static_cast<int>(raster.bytes[2 * i]) << 8) | raster.bytes[2 * i + 1];
            } else {
                id = raster.bytes[i];
            }
            labels.set(r, c, id);
        }
    }
    return labels;
}

LabelMapLoad load_labelmap_dir(const fs::path& dir) {
    static const std::regex name_re(R"(seg_([1-9][0-9]*)\.png)");
    std::map<int, fs::path> masks;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::smatch m;
        std::string name = entry.path().filename().string();
        if (std::regex_match(name, m, name_re)) {
            masks[std::stoi(m[1].str())] = entry.path();
        }
    }
    if (masks.empty()) {
        throw Error("no seg_<id>.png masks found in " + dir.string());
    }

    LabelMapLoad out;
    bool first = true;
    for (const auto& [id, path] : masks) {  // ascending id, later ids overwrite
        BinaryMask mask = load_mask(path);
        if (first) {
            out.labels = LabelMap(mask.height(), mask.width());
            first = false;
        } else if (mask.height() != out.labels.height() ||
                   mask.width() != out.labels.width()) {
            throw Error("segment mask dimensions differ: " + path.string());
        }
        for (int r = 0; r < mask.height(); ++r) {
            for (int c = 0; c < mask.width(); ++c) {
                if (!mask.get(r, c)) continue;
                if (out.labels.get(r, c) != 0) ++out.overlap_count;
                out.labels.set(r, c, id);
            }
        }
    }
    return out;
}

}  // namespace

RgbImage load_image(const fs::path& path) {
    FilePtr file = open_file(path, "rb");
    RasterFormat format = sniff_format(file.get());
    file.reset();
    switch (format) {
        case RasterFormat::Png:
            return raster_to_image(decode_png(path, /*rgb=*/true), path);
        case RasterFormat::Jpeg:
            return raster_to_image(decode_jpeg(path), path);
        default:
            throw Error("unsupported image format (need PNG or JPEG): " + path.string());
    }
}

void save_image(const RgbImage& image, const fs::path& path) {
    if (image.empty()) {
        throw Error("cannot save empty image");
    }
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }

    const int h = image.height();
    const int w = image.width();
    std::vector<unsigned char> bytes(static_cast<std::size_t>(h) * w * 3);
    const std::vector<float>& data = image.data();
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        float v = std::clamp(data[i], 0.0f, 1.0f);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
    }

    FilePtr file = open_file(path, "wb");
    std::string err_msg;
    std::vector<png_bytep> row_ptrs(h);
    for (int r = 0; r < h; ++r) {
        row_ptrs[r] = bytes.data() + static_cast<std::size_t>(r) * w * 3;
    }

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, &err_msg, png_error_fn, png_warn_fn);
    if (!png) throw Error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("PNG encode failed (" + path.string() + "): " + err_msg);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

BinaryMask load_mask(const fs::path& path, double threshold) {
    RgbImage img = load_image(path);
    BinaryMask mask(img.height(), img.width());
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c) {
            mask.set(r, c, luminance(img.pixel(r, c)) > threshold);
        }
    }
    return mask;
}

LabelMapLoad load_labelmap(const fs::path& source) {
    if (fs::is_directory(source)) {
        return load_labelmap_dir(source);
    }
    FilePtr file = open_file(source, "rb");
    if (sniff_format(file.get()) != RasterFormat::Png) {
        throw Error("label map file must be PNG: " + source.string());
    }
    file.reset();
    LabelMapLoad out;
    out.labels = raster_to_labels(decode_png(source, /*rgb=*/false), source);
    return out;
}

}  // namespace umbra
