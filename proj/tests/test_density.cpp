#include <catch2/catch_amalgamated.hpp>

#include "weedmap/density.hpp"
#include "weedmap/synthfield.hpp"
#include "weedmap/tiling.hpp"

using namespace weedmap;
using namespace weedmap::tiling;
using namespace weedmap::density;

namespace {

Tile tile_with_veg(int row, int col, int side, std::int64_t veg) {
    Tile t;
    t.row = row;
    t.col = col;
    t.side = side;
    t.pixels = ImageU8(side, side, 3);
    t.vegetation_pixels = veg;
    t.vegetation_fraction = double(veg) / (double(side) * side);
    return t;
}

}  // namespace

TEST_CASE("cluster rate pinned cases") {
    CHECK(cluster_rate(tile_with_veg(0, 0, 50, 0)) == 0.0);
    CHECK(cluster_rate(tile_with_veg(0, 0, 50, 2500)) == 1.0);
    CHECK(cluster_rate(tile_with_veg(0, 0, 50, 625)) == Catch::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("single weed tile appears with its rate") {
    TileGrid grid;
    grid.rows = 5;
    grid.cols = 5;
    grid.side = 10;
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) {
            auto t = tile_with_veg(r, c, 10, 0);
            t.label = TileLabel::background;
            if (r == 3 && c == 4) {
                t.vegetation_pixels = 20;  // fraction 0.2
                t.vegetation_fraction = 0.2;
                t.label = TileLabel::weed;
            }
            grid.tiles.push_back(t);
        }
    auto map = build_density_map(grid, "test");
    int weed_cells = 0;
    for (const auto& cell : map.cells)
        if (cell.label == TileLabel::weed) {
            ++weed_cells;
            CHECK(cell.row == 3);
            CHECK(cell.col == 4);
            CHECK(cell.cluster_rate == Catch::Approx(0.2));
        }
    CHECK(weed_cells == 1);
}

TEST_CASE("missing prediction for a kept tile is an error") {
    TileGrid grid;
    grid.rows = 1;
    grid.cols = 2;
    grid.side = 10;
    auto kept = tile_with_veg(0, 0, 10, 50);  // no label, kept
    auto bg = tile_with_veg(0, 1, 10, 0);
    bg.label = TileLabel::background;
    grid.tiles = {kept, bg};
    CHECK_THROWS_AS(build_density_map(grid, {}, "x"), std::invalid_argument);
    // with the prediction present it builds
    auto map = build_density_map(grid, {{{0, 0}, TileLabel::crop}}, "x");
    CHECK(map.at(0, 0).label == TileLabel::crop);
    CHECK(map.at(0, 1).label == TileLabel::background);
}

TEST_CASE("density map conserves vegetation pixels") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(150, 21));
    auto grid = make_tiles(overlay(field.image, field.veg_mask), 25);
    auto filtered = filter_tiles(grid, 0.10);
    std::vector<std::pair<std::pair<int, int>, TileLabel>> preds;
    for (const auto& t : filtered.kept)
        preds.push_back({{t.row, t.col}, TileLabel::weed});
    // rebuild a labeled grid: kept tiles weed, discarded background
    TileGrid labeled = grid;
    for (auto& t : labeled.tiles) t.label = TileLabel::background;
    auto map = build_density_map(grid, preds, field.image.source_id);

    std::int64_t sum_px = 0;
    double sum_cr_area = 0.0;
    for (const auto& cell : map.cells) {
        sum_px += cell.vegetation_pixels;
        sum_cr_area += cell.cluster_rate * map.tile_side * map.tile_side;
    }
    const auto total = static_cast<std::int64_t>(field.veg_mask.vegetation_pixels());
    CHECK(sum_px == total);
    CHECK(sum_cr_area == Catch::Approx(double(total)).margin(1e-6));
}

TEST_CASE("dense prediction respects the vegetation mask") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(100, 5));
    auto grid = make_tiles(overlay(field.image, field.veg_mask), 25);
    auto filtered = filter_tiles(grid, 0.10);
    std::vector<std::pair<std::pair<int, int>, TileLabel>> preds;
    for (const auto& t : filtered.kept) preds.push_back({{t.row, t.col}, TileLabel::weed});
    auto map = build_density_map(grid, preds, "f");
    auto dense = to_dense_prediction(map, field.veg_mask);
    for (std::size_t p = 0; p < dense.data.size(); ++p) {
        if (!field.veg_mask.mask.data[p])
            REQUIRE(dense.data[p] == static_cast<std::uint8_t>(PixelClass::soil));
    }
    // all kept tiles weed: every vegetation pixel is weed or soil (in a
    // background tile), never crop
    for (std::size_t p = 0; p < dense.data.size(); ++p)
        REQUIRE(dense.data[p] != static_cast<std::uint8_t>(PixelClass::crop));
}

TEST_CASE("all-background map has zero crop/weed pixels") {
    TileGrid grid;
    grid.rows = 2;
    grid.cols = 2;
    grid.side = 10;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            auto t = tile_with_veg(r, c, 10, 3);
            t.label = TileLabel::background;
            grid.tiles.push_back(t);
        }
    auto map = build_density_map(grid, "bg");
    ImageU8 m(20, 20, 1);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) m.at(x, y) = (x == y) ? 1 : 0;
    auto dense = to_dense_prediction(map, make_vegetation_mask(std::move(m)));
    for (auto v : dense.data)
        REQUIRE(v == static_cast<std::uint8_t>(PixelClass::soil));
}

TEST_CASE("heatmap renders full grid extent") {
    TileGrid grid;
    grid.rows = 2;
    grid.cols = 3;
    grid.side = 4;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) {
            auto t = tile_with_veg(r, c, 4, (r + c) % 2 ? 8 : 0);
            t.label = (r + c) % 2 ? TileLabel::weed : TileLabel::crop;
            grid.tiles.push_back(t);
        }
    auto img = render_heatmap(build_density_map(grid, "h"));
    CHECK(img.width == 12);
    CHECK(img.height == 8);
}
