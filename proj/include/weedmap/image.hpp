#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace weedmap {

// Interleaved row-major image: data[(y*width + x)*channels + c].
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c, T fill = T{})
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    bool empty() const { return data.empty(); }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    T& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    T at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

using ImageU8 = Image<std::uint8_t>;
using ImageF64 = Image<double>;
using ImageI32 = Image<std::int32_t>;

// A color field image, tracked with its provenance and resize state.
struct FieldImage {
    ImageU8 pixels;            // H x W x 3
    std::string source_id;
    bool resized = false;
};

// Binary vegetation/background labeling (1 = vegetation).
struct VegetationMask {
    ImageU8 mask;              // H x W x 1, values 0/1
    double vegetation_fraction = 0.0;

    std::size_t vegetation_pixels() const {
        std::size_t n = 0;
        for (auto v : mask.data) n += (v != 0);
        return n;
    }
};

inline VegetationMask make_vegetation_mask(ImageU8 mask) {
    if (mask.channels != 1) throw std::invalid_argument("vegetation mask must be 1-channel");
    VegetationMask out;
    out.mask = std::move(mask);
    std::size_t ones = out.vegetation_pixels();
    out.vegetation_fraction =
        out.mask.pixel_count() == 0 ? 0.0 : static_cast<double>(ones) / out.mask.pixel_count();
    return out;
}

// Dense class labels shared by annotations and dense predictions.
enum class PixelClass : std::uint8_t { soil = 0, crop = 1, weed = 2 };

enum class TileLabel : std::uint8_t { crop = 0, weed = 1, background = 2 };

inline const char* to_string(TileLabel l) {
    switch (l) {
        case TileLabel::crop: return "crop";
        case TileLabel::weed: return "weed";
        case TileLabel::background: return "background";
    }
    return "?";
}

inline TileLabel tile_label_from_string(const std::string& s) {
    if (s == "crop") return TileLabel::crop;
    if (s == "weed") return TileLabel::weed;
    if (s == "background") return TileLabel::background;
    throw std::invalid_argument("unknown tile label: " + s);
}

}  // namespace weedmap
