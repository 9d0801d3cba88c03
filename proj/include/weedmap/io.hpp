#pragma once

#include <png.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "weedmap/image.hpp"

namespace weedmap::io {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using UniqueFile = std::unique_ptr<std::FILE, FileCloser>;

inline ImageU8 read_png(const std::string& path) {
    UniqueFile fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode PNG " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    // drop alpha: masks and field images are opaque rasters
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    int channels = png_get_channels(png, info);
    ImageU8 img(static_cast<int>(w), static_cast<int>(h), channels);
    std::vector<png_bytep> rows(h);
    const std::size_t stride = static_cast<std::size_t>(w) * channels;
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.data.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_png(const std::string& path, const ImageU8& img) {
    if (img.channels != 1 && img.channels != 3)
        throw IoError("write_png: only 1- or 3-channel images supported");
    UniqueFile fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode PNG " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.data.data() + y * stride);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Uncompressed 24-bit BMP (BITMAPINFOHEADER), bottom-up or top-down.
inline ImageU8 read_bmp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() < 54 || raw[0] != 'B' || raw[1] != 'M')
        throw IoError("not a BMP file: " + path);
    auto u32 = [&](std::size_t off) {
        std::uint32_t v;
        std::memcpy(&v, raw.data() + off, 4);
        return v;
    };
    auto i32 = [&](std::size_t off) {
        std::int32_t v;
        std::memcpy(&v, raw.data() + off, 4);
        return v;
    };
    auto u16 = [&](std::size_t off) {
        std::uint16_t v;
        std::memcpy(&v, raw.data() + off, 2);
        return v;
    };
    const std::uint32_t data_off = u32(10);
    const std::int32_t w = i32(18);
    std::int32_t h = i32(22);
    const bool top_down = h < 0;
    if (top_down) h = -h;
    if (u16(28) != 24 || u32(30) != 0)
        throw IoError("read_bmp: only uncompressed 24-bit BMP supported");
    const std::size_t row_stride = (static_cast<std::size_t>(w) * 3 + 3) & ~std::size_t{3};
    if (raw.size() < data_off + row_stride * h) throw IoError("truncated BMP: " + path);

    ImageU8 img(w, h, 3);
    for (int y = 0; y < h; ++y) {
        const int src_y = top_down ? y : (h - 1 - y);
        const char* row = raw.data() + data_off + row_stride * src_y;
        for (int x = 0; x < w; ++x) {
            img.at(x, y, 0) = static_cast<std::uint8_t>(row[x * 3 + 2]);
            img.at(x, y, 1) = static_cast<std::uint8_t>(row[x * 3 + 1]);
            img.at(x, y, 2) = static_cast<std::uint8_t>(row[x * 3 + 0]);
        }
    }
    return img;
}

}  // namespace detail

// Reads a PNG or BMP raster. 3-channel output unless the file is grayscale.
inline ImageU8 read_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open " + path);
    unsigned char sig[8] = {};
    probe.read(reinterpret_cast<char*>(sig), 8);
    probe.close();
    if (sig[0] == 0x89 && sig[1] == 'P') return detail::read_png(path);
    if (sig[0] == 'B' && sig[1] == 'M') return detail::read_bmp(path);
    throw IoError("unsupported image format (expect PNG or BMP): " + path);
}

inline void write_image(const std::string& path, const ImageU8& img) {
    detail::write_png(path, img);
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace weedmap::io
