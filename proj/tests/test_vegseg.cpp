#include <catch2/catch_amalgamated.hpp>

#include "weedmap/imgproc.hpp"
#include "weedmap/metrics.hpp"
#include "weedmap/slic.hpp"
#include "weedmap/synthfield.hpp"
#include "weedmap/vegseg.hpp"

using namespace weedmap;
using namespace weedmap::vegseg;

namespace {

SegParams small_params(std::uint64_t seed) {
    SegParams p;
    p.channels = 32;
    p.q = 32;
    p.max_iters = 80;
    p.seed = seed;
    return p;
}

SegResult run_segmentation(const FieldImage& img, const SegParams& params, int n_superpixels) {
    auto sp = slic(rgb_to_lab(img.pixels), n_superpixels, 25.0);
    return segment_unsupervised(img, sp, params);
}

}  // namespace

TEST_CASE("two-tone image separates into the two halves") {
    FieldImage f;
    f.pixels = ImageU8(64, 64, 3);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const bool left = x < 32;
            f.pixels.at(x, y, 0) = left ? 60 : 130;
            f.pixels.at(x, y, 1) = left ? 140 : 95;
            f.pixels.at(x, y, 2) = left ? 55 : 70;
        }
    auto res = run_segmentation(f, small_params(3), 40);
    REQUIRE(res.iterations_used <= 80);

    // agreement with the known partition, up to label swap
    std::int64_t agree = 0;
    const int left_lab = res.cluster_labels.at(0, 0);
    const int right_lab = res.cluster_labels.at(63, 0);
    REQUIRE(left_lab != right_lab);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const int want = x < 32 ? left_lab : right_lab;
            agree += res.cluster_labels.at(x, y) == want;
        }
    CHECK(double(agree) / (64.0 * 64.0) >= 0.99);
}

TEST_CASE("constant image collapses to a single cluster") {
    FieldImage f;
    f.pixels = ImageU8(48, 48, 3);
    for (std::size_t p = 0; p < f.pixels.pixel_count(); ++p) {
        f.pixels.data[p * 3 + 0] = 100;
        f.pixels.data[p * 3 + 1] = 100;
        f.pixels.data[p * 3 + 2] = 100;
    }
    auto res = run_segmentation(f, small_params(1), 20);
    std::set<int> labels(res.cluster_labels.data.begin(), res.cluster_labels.data.end());
    CHECK(labels.size() == 1);
}

TEST_CASE("segmentation is reproducible for a fixed seed") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(96, 17));
    auto sp = slic(rgb_to_lab(field.image.pixels), 184, 25.0);
    auto a = segment_unsupervised(field.image, sp, small_params(11));
    auto b = segment_unsupervised(field.image, sp, small_params(11));
    CHECK(a.cluster_labels.data == b.cluster_labels.data);
    CHECK(a.iterations_used == b.iterations_used);
}

TEST_CASE("synthetic field segmentation reaches target quality") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(96, 5));
    auto res = run_segmentation(field.image, small_params(5), 184);
    auto mask = select_vegetation(res.cluster_labels, field.image.pixels);
    const double iou = metrics::miou(mask.mask, field.veg_mask.mask, 2);
    INFO("mIoU = " << iou << " after " << res.iterations_used << " iterations");
    CHECK(iou >= 0.85);
}

TEST_CASE("select_vegetation picks the smaller cluster") {
    ImageI32 labels(10, 10, 1, 7);
    // 10 pixels of cluster 3
    for (int i = 0; i < 10; ++i) labels.data[i] = 3;
    ImageU8 img(10, 10, 3, 90);
    auto mask = select_vegetation(labels, img);
    CHECK(mask.vegetation_fraction == Catch::Approx(0.10));
    for (int i = 0; i < 10; ++i) REQUIRE(mask.mask.data[i] == 1);
    for (int i = 10; i < 100; ++i) REQUIRE(mask.mask.data[i] == 0);
}

TEST_CASE("select_vegetation is invariant to label permutation") {
    ImageI32 labels(10, 10, 1, 0);
    for (int i = 0; i < 30; ++i) labels.data[i] = 1;
    ImageU8 img(10, 10, 3, 90);
    auto a = select_vegetation(labels, img);
    ImageI32 swapped = labels;
    for (auto& v : swapped.data) v = 1 - v;
    auto b = select_vegetation(swapped, img);
    CHECK(a.mask.data == b.mask.data);
}

TEST_CASE("exact tie goes to the greener cluster") {
    ImageI32 labels(10, 10, 1);
    ImageU8 img(10, 10, 3);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x) {
            const bool left = x < 5;
            labels.at(x, y) = left ? 0 : 1;
            img.at(x, y, 0) = left ? 60 : 130;
            img.at(x, y, 1) = left ? 150 : 90;  // left is greener
            img.at(x, y, 2) = left ? 60 : 70;
        }
    auto mask = select_vegetation(labels, img);
    CHECK(mask.vegetation_fraction == Catch::Approx(0.5));
    CHECK(mask.mask.at(0, 0) == 1);
    CHECK(mask.mask.at(9, 0) == 0);
}

TEST_CASE("select_vegetation rejects more than two clusters") {
    ImageI32 labels(4, 4, 1, 0);
    labels.data[0] = 1;
    labels.data[1] = 2;
    ImageU8 img(4, 4, 3, 10);
    CHECK_THROWS_AS(select_vegetation(labels, img), std::logic_error);
}

TEST_CASE("vegetation fraction never exceeds one half except on ties") {
    auto field = synthfield::generate(synthfield::high_contrast_preset(96, 23));
    auto res = run_segmentation(field.image, small_params(23), 184);
    auto mask = select_vegetation(res.cluster_labels, field.image.pixels);
    CHECK(mask.vegetation_fraction <= 0.5);
}
