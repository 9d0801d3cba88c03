#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "weedmap/imgproc.hpp"
#include "weedmap/rng.hpp"
#include "weedmap/slic.hpp"

using namespace weedmap;

namespace {

ImageU8 random_rgb(int w, int h, Rng& rng) {
    ImageU8 img(w, h, 3);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

}  // namespace

TEST_CASE("uniform image with n=4 gives the seeded 2x2 grid") {
    ImageU8 img(100, 100, 3);
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        img.data[p * 3 + 0] = 80;
        img.data[p * 3 + 1] = 140;
        img.data[p * 3 + 2] = 90;
    }
    auto sp = slic(rgb_to_lab(img), 4, 25.0);
    REQUIRE(sp.count == 4);
    std::array<std::size_t, 4> sizes{};
    for (int v : sp.labels.data) ++sizes[v];
    for (auto s : sizes) CHECK(s == 2500);
    // quadrant structure
    CHECK(sp.labels.at(10, 10) == sp.labels.at(40, 40));
    CHECK(sp.labels.at(60, 10) == sp.labels.at(90, 40));
    CHECK(sp.labels.at(10, 10) != sp.labels.at(60, 10));
    CHECK(sp.labels.at(10, 60) != sp.labels.at(10, 10));
}

TEST_CASE("n=1 gives a single superpixel") {
    Rng rng(5);
    auto sp = slic(rgb_to_lab(random_rgb(40, 30, rng)), 1, 25.0);
    CHECK(sp.count == 1);
    for (int v : sp.labels.data) REQUIRE(v == 0);
}

TEST_CASE("slic rejects bad parameters") {
    ImageU8 img(10, 10, 3);
    auto lab = rgb_to_lab(img);
    CHECK_THROWS_AS(slic(lab, 101, 25.0), std::invalid_argument);
    CHECK_THROWS_AS(slic(lab, 0, 25.0), std::invalid_argument);
    CHECK_THROWS_AS(slic(lab, 4, 0.0), std::invalid_argument);
}

TEST_CASE("field-like image yields connected, reasonably sized superpixels") {
    Rng rng(99);
    // smooth-ish field: blocks of color plus noise
    ImageU8 img(120, 120, 3);
    for (int y = 0; y < 120; ++y)
        for (int x = 0; x < 120; ++x) {
            const bool blob = ((x / 30) + (y / 30)) % 2 == 0;
            img.at(x, y, 0) = static_cast<std::uint8_t>((blob ? 60 : 130) + rng.below(20));
            img.at(x, y, 1) = static_cast<std::uint8_t>((blob ? 120 : 90) + rng.below(20));
            img.at(x, y, 2) = static_cast<std::uint8_t>((blob ? 50 : 70) + rng.below(20));
        }
    const int requested = 144;  // mean size ~100 px
    auto sp = slic(rgb_to_lab(img), requested, 25.0);
    REQUIRE(sp.count >= 1);
    REQUIRE(oracles::superpixels_valid(sp.labels, sp.count));
    const double mean_size = 120.0 * 120.0 / sp.count;
    CHECK(mean_size == Catch::Approx(100.0).margin(40.0));
}

TEST_CASE("partition and 4-connectivity hold on random images") {
    Rng rng(2024);
    for (int trial = 0; trial < 10; ++trial) {
        const int w = 32 + static_cast<int>(rng.below(40));
        const int h = 32 + static_cast<int>(rng.below(40));
        const int n = 4 + static_cast<int>(rng.below(30));
        auto sp = slic(rgb_to_lab(random_rgb(w, h, rng)), n, 25.0);
        REQUIRE(oracles::superpixels_valid(sp.labels, sp.count));
    }
}
