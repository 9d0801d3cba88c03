#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "weedmap/data_io.hpp"
#include "weedmap/synthfield.hpp"

using namespace weedmap;
using namespace weedmap::dataio;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<synthfield::SynthField> make_fields(int n, int size, std::uint64_t seed0) {
    std::vector<synthfield::SynthField> fields;
    for (int i = 0; i < n; ++i)
        fields.push_back(synthfield::generate(
            synthfield::high_contrast_preset(size, seed0 + static_cast<std::uint64_t>(i))));
    return fields;
}

}  // namespace

TEST_CASE("synthetic datasets load back with matching counts") {
    TempDir dir("wm_ds_roundtrip");
    auto fields = make_fields(4, 100, 1);
    synthfield::write_dataset(dir.path.string(), fields);
    auto manifest = load_dataset(dir.path.string(), ColorMap::standard());
    REQUIRE(manifest.samples.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(manifest.samples[i].image.pixels.data == fields[i].image.pixels.data);
        CHECK(manifest.samples[i].annotation.data == fields[i].class_map.data);
    }
}

TEST_CASE("split.txt assignments are honored") {
    TempDir dir("wm_ds_split");
    auto fields = make_fields(4, 100, 5);
    std::vector<bool> is_test{false, true, false, true};
    synthfield::write_dataset(dir.path.string(), fields, &is_test);
    auto manifest = load_dataset(dir.path.string(), ColorMap::standard());
    CHECK(manifest.samples[0].split == Split::train);
    CHECK(manifest.samples[1].split == Split::test);
    CHECK(manifest.samples[2].split == Split::train);
    CHECK(manifest.samples[3].split == Split::test);
}

TEST_CASE("empty dataset directory yields an empty manifest") {
    TempDir dir("wm_ds_empty");
    fs::create_directories(dir.path / "images");
    auto manifest = load_dataset(dir.path.string(), ColorMap::standard());
    CHECK(manifest.samples.empty());
}

TEST_CASE("missing annotation is a hard error") {
    TempDir dir("wm_ds_missing");
    auto fields = make_fields(1, 64, 9);
    synthfield::write_dataset(dir.path.string(), fields);
    fs::remove(dir.path / "annotations" / "field0000.png");
    CHECK_THROWS_WITH(load_dataset(dir.path.string(), ColorMap::standard()),
                      Catch::Matchers::ContainsSubstring("missing annotation"));
}

TEST_CASE("unknown annotation colors are named in the error") {
    TempDir dir("wm_ds_color");
    auto fields = make_fields(1, 64, 11);
    synthfield::write_dataset(dir.path.string(), fields);
    // poison one annotation pixel
    auto ann_path = (dir.path / "annotations" / "field0000.png").string();
    auto ann = io::read_image(ann_path);
    ann.data[0] = 12;
    ann.data[1] = 34;
    ann.data[2] = 56;
    io::write_image(ann_path, ann);
    CHECK_THROWS_WITH(load_dataset(dir.path.string(), ColorMap::standard()),
                      Catch::Matchers::ContainsSubstring("#0c2238"));
}

TEST_CASE("seeded split respects the requested ratio") {
    DatasetManifest manifest;
    for (int i = 0; i < 90; ++i) {
        AnnotatedSample s;
        s.image.source_id = "s" + std::to_string(i);
        manifest.samples.push_back(std::move(s));
    }
    assign_splits(manifest, 2.0 / 3.0, 123);
    int train = 0;
    for (const auto& s : manifest.samples) train += s.split == Split::train;
    CHECK(train == 60);
}

TEST_CASE("augmented samples inherit their source's split") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(64, 3));
    AnnotatedSample s;
    s.image = field.image;
    s.annotation = field.class_map;
    s.split = Split::test;
    auto out = augment(s, {HFlip{}, Rotate{17.0}, Zoom{1.1}}, 1);
    REQUIRE(out.size() == 3);
    for (const auto& a : out) {
        CHECK(a.split == Split::test);
        CHECK(a.augmented_from == s.source_id());
    }
}

TEST_CASE("flip augmentation is an exact involution") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(64, 7));
    AnnotatedSample s;
    s.image = field.image;
    s.annotation = field.class_map;
    auto once = augment(s, {HFlip{}}, 0)[0];
    auto twice = augment(once, {HFlip{}}, 0)[0];
    CHECK(twice.image.pixels.data == s.image.pixels.data);
    CHECK(twice.annotation.data == s.annotation.data);
}

TEST_CASE("right-angle rotation preserves the label multiset") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(64, 13));
    AnnotatedSample s;
    s.image = field.image;
    s.annotation = field.class_map;
    auto rot = augment(s, {Rotate{90.0}}, 0)[0];
    std::array<long, 3> before{}, after{};
    for (auto v : s.annotation.data) ++before[v];
    for (auto v : rot.annotation.data) ++after[v];
    CHECK(before == after);
}

TEST_CASE("zoom rejects non-positive scales") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(64, 15));
    AnnotatedSample s;
    s.image = field.image;
    s.annotation = field.class_map;
    CHECK_THROWS_AS(augment(s, {Zoom{0.0}}, 0), std::invalid_argument);
    CHECK_THROWS_AS(augment(s, {}, 0), std::invalid_argument);
}

TEST_CASE("augment_dataset grows 60 originals into 90 samples") {
    DatasetManifest manifest;
    for (int i = 0; i < 60; ++i) {
        auto field = synthfield::generate(
            synthfield::high_contrast_preset(48, 100 + static_cast<std::uint64_t>(i)));
        AnnotatedSample s;
        s.image = field.image;
        s.annotation = field.class_map;
        manifest.samples.push_back(std::move(s));
    }
    augment_dataset(manifest, 77);
    CHECK(manifest.samples.size() == 90);
    int augmented = 0;
    for (const auto& s : manifest.samples) augmented += s.augmented_from.has_value();
    CHECK(augmented == 30);
}

TEST_CASE("tile labels follow the majority rule with ties to weed") {
    // hand-built 100x100 annotation, side 50: four tiles
    AnnotatedSample s;
    s.annotation = ImageU8(100, 100, 1, static_cast<std::uint8_t>(PixelClass::soil));
    auto fill = [&](int tile_r, int tile_c, int crop_px, int weed_px) {
        int placed = 0;
        for (int y = 0; y < 50 && placed < crop_px + weed_px; ++y)
            for (int x = 0; x < 50 && placed < crop_px + weed_px; ++x) {
                s.annotation.at(tile_c * 50 + x, tile_r * 50 + y) = static_cast<std::uint8_t>(
                    placed < crop_px ? PixelClass::crop : PixelClass::weed);
                ++placed;
            }
    };
    fill(0, 0, 40, 500);   // 21.6% veg, weed majority
    fill(0, 1, 300, 300);  // 24% veg, exact crop/weed tie -> weed
    fill(1, 0, 400, 260);  // 26.4% veg, crop majority
    fill(1, 1, 100, 100);  // 8% veg -> background
    auto labels = derive_tile_labels(s, 50, 0.10);
    REQUIRE(labels.size() == 4);
    auto at = [&](int r, int c) {
        for (auto& [lr, lc, lab] : labels)
            if (lr == r && lc == c) return lab;
        throw std::logic_error("missing tile");
    };
    CHECK(at(0, 0) == TileLabel::weed);
    CHECK(at(0, 1) == TileLabel::weed);
    CHECK(at(1, 0) == TileLabel::crop);
    CHECK(at(1, 1) == TileLabel::background);
}

TEST_CASE("tile label derivation covers majority and threshold cases") {
    AnnotatedSample s;
    s.annotation = ImageU8(100, 50, 1, static_cast<std::uint8_t>(PixelClass::soil));
    // left tile: 300 crop + 400 weed (28% veg) -> weed
    for (int i = 0; i < 700; ++i)
        s.annotation.at(i % 50, i / 50) =
            static_cast<std::uint8_t>(i < 300 ? PixelClass::crop : PixelClass::weed);
    // right tile: 600 crop + 200 weed (32% veg) -> crop
    for (int i = 0; i < 800; ++i)
        s.annotation.at(50 + i % 50, i / 50) =
            static_cast<std::uint8_t>(i < 600 ? PixelClass::crop : PixelClass::weed);
    auto labels = derive_tile_labels(s, 50, 0.10);
    REQUIRE(labels.size() == 2);
    CHECK(std::get<2>(labels[0]) == TileLabel::weed);
    CHECK(std::get<2>(labels[1]) == TileLabel::crop);
}

TEST_CASE("tile count equals the grid arithmetic before filtering") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(200, 21));
    AnnotatedSample s;
    s.image = field.image;
    s.annotation = field.class_map;
    auto labels = derive_tile_labels(s, 25, 0.10);
    CHECK(labels.size() == 64);  // (200/25)^2
    CHECK_THROWS_AS(derive_tile_labels(s, 30, 0.10), std::invalid_argument);
}

TEST_CASE("preprocessing a sample resizes both rasters consistently") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(150, 33));
    AnnotatedSample s;
    s.image = field.image;
    s.annotation = field.class_map;
    auto pre = preprocess_sample(s, 100);
    CHECK(pre.image.pixels.width == 100);
    CHECK(pre.annotation.width == 100);
    CHECK(pre.image.resized);
    std::set<std::uint8_t> classes(pre.annotation.data.begin(), pre.annotation.data.end());
    for (auto c : classes) CHECK(c <= 2);
}
