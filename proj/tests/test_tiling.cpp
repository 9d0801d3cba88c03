#include <catch2/catch_amalgamated.hpp>

#include "weedmap/rng.hpp"
#include "weedmap/synthfield.hpp"
#include "weedmap/tiling.hpp"

using namespace weedmap;
using namespace weedmap::tiling;

namespace {

FieldImage constant_field(int side, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    FieldImage f;
    f.pixels = ImageU8(side, side, 3);
    for (std::size_t p = 0; p < f.pixels.pixel_count(); ++p) {
        f.pixels.data[p * 3 + 0] = r;
        f.pixels.data[p * 3 + 1] = g;
        f.pixels.data[p * 3 + 2] = b;
    }
    return f;
}

VegetationMask mask_of(int side, const std::function<bool(int, int)>& pred) {
    ImageU8 m(side, side, 1);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) m.at(x, y) = pred(x, y) ? 1 : 0;
    return make_vegetation_mask(std::move(m));
}

}  // namespace

TEST_CASE("all-ones mask keeps the image, all-zeros blacks it out") {
    FieldImage f = constant_field(50, 90, 150, 60);
    auto ones = mask_of(50, [](int, int) { return true; });
    auto zeros = mask_of(50, [](int, int) { return false; });
    CHECK(overlay(f, ones).pixels.data == f.pixels.data);
    auto black = overlay(f, zeros);
    for (auto v : black.pixels.data) REQUIRE(v == 0);
}

TEST_CASE("checkerboard mask zeroes exactly the off cells") {
    FieldImage f = constant_field(8, 10, 200, 30);
    auto checker = mask_of(8, [](int x, int y) { return (x + y) % 2 == 0; });
    auto masked = overlay(f, checker);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            const bool on = (x + y) % 2 == 0;
            REQUIRE(masked.pixels.at(x, y, 1) == (on ? 200 : 0));
        }
}

TEST_CASE("overlay is idempotent") {
    FieldImage f = constant_field(16, 44, 99, 22);
    auto m = mask_of(16, [](int x, int y) { return x > y; });
    auto once = overlay(f, m);
    FieldImage again;
    again.pixels = once.pixels;
    auto twice = overlay(again, m);
    CHECK(twice.pixels.data == once.pixels.data);
}

TEST_CASE("overlay requires matching dimensions") {
    FieldImage f = constant_field(10, 1, 2, 3);
    auto m = mask_of(12, [](int, int) { return true; });
    CHECK_THROWS_AS(overlay(f, m), std::invalid_argument);
}

TEST_CASE("500x500 tiles into the documented grid sizes") {
    FieldImage f = constant_field(500, 10, 10, 10);
    auto m = mask_of(500, [](int, int) { return false; });
    auto masked = overlay(f, m);
    CHECK(make_tiles(masked, 50).tiles.size() == 100);
    CHECK(make_tiles(masked, 100).tiles.size() == 25);
    CHECK(make_tiles(masked, 25).tiles.size() == 400);
    CHECK_THROWS_AS(make_tiles(masked, 33), std::invalid_argument);
}

TEST_CASE("tile vegetation counts conserve the mask total") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(200, 7));
    auto masked = overlay(field.image, field.veg_mask);
    auto grid = make_tiles(masked, 25);
    std::int64_t total = 0;
    for (const auto& t : grid.tiles) total += t.vegetation_pixels;
    CHECK(total == static_cast<std::int64_t>(field.veg_mask.vegetation_pixels()));
}

TEST_CASE("tiles reassemble the masked image exactly") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(100, 3));
    auto masked = overlay(field.image, field.veg_mask);
    auto grid = make_tiles(masked, 25);
    CHECK(reassemble(grid).data == masked.pixels.data);
}

TEST_CASE("filter threshold boundary follows the less-than rule") {
    // 2500-pixel tiles: 249 vegetation pixels (9.96%) drop, 250 (10%) stay
    FieldImage f = constant_field(100, 50, 160, 40);
    auto m = mask_of(100, [](int x, int y) {
        const int tile = x / 50;
        const int idx = (y * 50 + x % 50);
        return tile == 0 ? idx < 249 : idx < 250;
    });
    auto grid = make_tiles(overlay(f, m), 50);
    REQUIRE(grid.tiles.size() == 4);
    auto filtered = filter_tiles(grid, 0.10);
    REQUIRE(filtered.kept.size() == 1);
    CHECK(filtered.kept[0].col == 1);
    CHECK(filtered.kept[0].row == 0);
    for (const auto& t : filtered.discarded_as_background)
        CHECK(t.label == TileLabel::background);
}

TEST_CASE("kept and discarded partition the grid") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(150, 11));
    auto grid = make_tiles(overlay(field.image, field.veg_mask), 25);
    auto filtered = filter_tiles(grid, 0.10);
    CHECK(filtered.kept.size() + filtered.discarded_as_background.size() == grid.tiles.size());
    std::set<std::pair<int, int>> seen;
    for (const auto& t : filtered.kept) seen.insert({t.row, t.col});
    for (const auto& t : filtered.discarded_as_background) {
        REQUIRE_FALSE(seen.count({t.row, t.col}));
        seen.insert({t.row, t.col});
    }
    CHECK(seen.size() == grid.tiles.size());
}

TEST_CASE("all-background grid keeps nothing") {
    FieldImage f = constant_field(100, 30, 30, 30);
    auto grid = make_tiles(overlay(f, mask_of(100, [](int, int) { return false; })), 50);
    auto filtered = filter_tiles(grid, 0.10);
    CHECK(filtered.kept.empty());
    CHECK(filtered.discarded_as_background.size() == 4);
}
