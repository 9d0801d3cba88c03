#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "weedmap/image.hpp"
#include "weedmap/tiling.hpp"

namespace weedmap::density {

// Cluster rate: vegetation coverage of the region over its total area.
// For a weed-labeled tile all vegetation pixels count as weed coverage;
// a tile carries a single label, so no sub-tile attribution happens.
inline double cluster_rate(const tiling::Tile& tile) {
    return static_cast<double>(tile.vegetation_pixels) /
           (static_cast<double>(tile.side) * tile.side);
}

struct DensityCell {
    int row = 0;
    int col = 0;
    TileLabel label = TileLabel::background;
    double cluster_rate = 0.0;
    std::int64_t vegetation_pixels = 0;
};

// Per-tile label + cluster-rate grid; the pipeline's end product.
struct DensityMap {
    std::vector<DensityCell> cells;  // row-major, rows*cols entries
    int rows = 0;
    int cols = 0;
    int tile_side = 0;
    std::string source_id;

    const DensityCell& at(int r, int c) const {
        return cells[static_cast<std::size_t>(r) * cols + c];
    }
};

// Predictions must cover every kept tile; discarded tiles are already
// background-labeled by filter_tiles.
inline DensityMap build_density_map(const tiling::TileGrid& grid,
                                    const std::vector<std::pair<std::pair<int, int>, TileLabel>>&
                                        predictions,
                                    const std::string& source_id = {}) {
    DensityMap map;
    map.rows = grid.rows;
    map.cols = grid.cols;
    map.tile_side = grid.side;
    map.source_id = source_id;
    map.cells.resize(grid.tiles.size());

    std::vector<int> pred_index(grid.tiles.size(), -1);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const auto& [rc, label] = predictions[i];
        if (rc.first < 0 || rc.first >= grid.rows || rc.second < 0 || rc.second >= grid.cols)
            throw std::invalid_argument("build_density_map: prediction outside grid");
        pred_index[static_cast<std::size_t>(rc.first) * grid.cols + rc.second] =
            static_cast<int>(i);
    }

    for (std::size_t i = 0; i < grid.tiles.size(); ++i) {
        const tiling::Tile& t = grid.tiles[i];
        DensityCell& cell = map.cells[static_cast<std::size_t>(t.row) * grid.cols + t.col];
        cell.row = t.row;
        cell.col = t.col;
        cell.vegetation_pixels = t.vegetation_pixels;
        cell.cluster_rate = cluster_rate(t);
        if (t.label == TileLabel::background) {
            cell.label = TileLabel::background;
        } else {
            const int pi = pred_index[i];
            if (pi < 0)
                throw std::invalid_argument("build_density_map: missing prediction for kept tile");
            cell.label = predictions[pi].second;
        }
    }
    return map;
}

// Convenience overload for a grid whose tiles already carry labels.
inline DensityMap build_density_map(const tiling::TileGrid& grid,
                                    const std::string& source_id = {}) {
    DensityMap map;
    map.rows = grid.rows;
    map.cols = grid.cols;
    map.tile_side = grid.side;
    map.source_id = source_id;
    map.cells.resize(grid.tiles.size());
    for (const tiling::Tile& t : grid.tiles) {
        if (!t.label)
            throw std::invalid_argument("build_density_map: unlabeled tile at (" +
                                        std::to_string(t.row) + "," + std::to_string(t.col) + ")");
        DensityCell& cell = map.cells[static_cast<std::size_t>(t.row) * grid.cols + t.col];
        cell = {t.row, t.col, *t.label, cluster_rate(t), t.vegetation_pixels};
    }
    return map;
}

// Expand tile labels to a dense pixel map: vegetation pixels take their
// tile's class, everything masked out is soil. Background tiles contribute
// no crop/weed pixels.
inline ImageU8 to_dense_prediction(const DensityMap& map, const VegetationMask& mask) {
    if (mask.mask.width != map.cols * map.tile_side || mask.mask.height != map.rows * map.tile_side)
        throw std::invalid_argument("to_dense_prediction: mask/grid dimension mismatch");
    ImageU8 dense(mask.mask.width, mask.mask.height, 1,
                  static_cast<std::uint8_t>(PixelClass::soil));
    for (int y = 0; y < mask.mask.height; ++y) {
        for (int x = 0; x < mask.mask.width; ++x) {
            if (!mask.mask.at(x, y)) continue;
            const DensityCell& cell = map.at(y / map.tile_side, x / map.tile_side);
            PixelClass pc = PixelClass::soil;
            if (cell.label == TileLabel::crop) pc = PixelClass::crop;
            if (cell.label == TileLabel::weed) pc = PixelClass::weed;
            dense.at(x, y) = static_cast<std::uint8_t>(pc);
        }
    }
    return dense;
}

// Decision-support rendering: weed tiles shaded by cluster rate, crop tiles
// flat green, background gray.
inline ImageU8 render_heatmap(const DensityMap& map) {
    const int side = map.tile_side;
    ImageU8 img(map.cols * side, map.rows * side, 3);
    for (const DensityCell& cell : map.cells) {
        std::uint8_t r = 96, g = 96, b = 96;
        if (cell.label == TileLabel::crop) {
            r = 46;
            g = 160;
            b = 70;
        } else if (cell.label == TileLabel::weed) {
            const double t = std::min(1.0, cell.cluster_rate);
            r = static_cast<std::uint8_t>(120 + 135 * t);
            g = static_cast<std::uint8_t>(60 * (1.0 - t));
            b = static_cast<std::uint8_t>(40 * (1.0 - t));
        }
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                img.at(cell.col * side + x, cell.row * side + y, 0) = r;
                img.at(cell.col * side + x, cell.row * side + y, 1) = g;
                img.at(cell.col * side + x, cell.row * side + y, 2) = b;
            }
        }
    }
    return img;
}

}  // namespace weedmap::density
