#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "weedmap/image.hpp"

namespace weedmap::tiling {

// Vegetation-masked image: background pixels are exact zeros so every
// downstream consumer sees one background encoding.
struct MaskedImage {
    ImageU8 pixels;       // H x W x 3
    VegetationMask mask;  // H x W
};

struct Tile {
    int row = 0;
    int col = 0;
    int side = 0;
    ImageU8 pixels;  // side x side x 3, from the masked image
    std::int64_t vegetation_pixels = 0;
    double vegetation_fraction = 0.0;
    std::optional<TileLabel> label;
};

struct TileGrid {
    std::vector<Tile> tiles;  // row-major
    int rows = 0;
    int cols = 0;
    int side = 0;
};

inline MaskedImage overlay(const FieldImage& image, const VegetationMask& mask) {
    const ImageU8& px = image.pixels;
    if (mask.mask.width != px.width || mask.mask.height != px.height)
        throw std::invalid_argument("overlay: dimension mismatch");
    MaskedImage out;
    out.mask = mask;
    out.pixels = ImageU8(px.width, px.height, 3);
    const std::size_t n = px.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        if (mask.mask.data[p]) {
            out.pixels.data[p * 3 + 0] = px.data[p * 3 + 0];
            out.pixels.data[p * 3 + 1] = px.data[p * 3 + 1];
            out.pixels.data[p * 3 + 2] = px.data[p * 3 + 2];
        }
    }
    return out;
}

// Partition into non-overlapping side x side tiles, row-major.
inline TileGrid make_tiles(const MaskedImage& masked, int side) {
    const ImageU8& px = masked.pixels;
    if (side <= 0 || px.width % side != 0 || px.height % side != 0)
        throw std::invalid_argument("make_tiles: side must divide image dimensions");
    TileGrid grid;
    grid.side = side;
    grid.rows = px.height / side;
    grid.cols = px.width / side;
    grid.tiles.reserve(static_cast<std::size_t>(grid.rows) * grid.cols);
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            Tile t;
            t.row = r;
            t.col = c;
            t.side = side;
            t.pixels = ImageU8(side, side, 3);
            for (int y = 0; y < side; ++y) {
                for (int x = 0; x < side; ++x) {
                    const int gx = c * side + x, gy = r * side + y;
                    for (int ch = 0; ch < 3; ++ch)
                        t.pixels.at(x, y, ch) = px.at(gx, gy, ch);
                    t.vegetation_pixels += masked.mask.mask.at(gx, gy) ? 1 : 0;
                }
            }
            t.vegetation_fraction =
                static_cast<double>(t.vegetation_pixels) / (static_cast<double>(side) * side);
            grid.tiles.push_back(std::move(t));
        }
    }
    return grid;
}

struct FilteredTiles {
    std::vector<Tile> kept;
    std::vector<Tile> discarded_as_background;
};

// Tiles with vegetation coverage below the threshold are not infested;
// they are labeled background (in the grid as well) and dropped from
// classification.
inline FilteredTiles filter_tiles(TileGrid& grid, double threshold = 0.10) {
    if (threshold < 0.0 || threshold > 1.0)
        throw std::invalid_argument("filter_tiles: threshold must be in [0,1]");
    FilteredTiles out;
    for (Tile& t : grid.tiles) {
        if (t.vegetation_fraction >= threshold) {
            out.kept.push_back(t);
        } else {
            t.label = TileLabel::background;
            out.discarded_as_background.push_back(t);
        }
    }
    return out;
}

// Row-major reassembly; exact inverse of make_tiles on the pixel data.
inline ImageU8 reassemble(const TileGrid& grid) {
    ImageU8 img(grid.cols * grid.side, grid.rows * grid.side, 3);
    for (const Tile& t : grid.tiles)
        for (int y = 0; y < t.side; ++y)
            for (int x = 0; x < t.side; ++x)
                for (int c = 0; c < 3; ++c)
                    img.at(t.col * t.side + x, t.row * t.side + y, c) = t.pixels.at(x, y, c);
    return img;
}

}  // namespace weedmap::tiling
