#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <memory>

#include "weedmap/classify.hpp"
#include "weedmap/rng.hpp"

using namespace weedmap;
using namespace weedmap::classify;

namespace {

LabeledExample feat_ex(std::vector<float> f, int label, Split split = Split::train) {
    LabeledExample e;
    e.features = std::move(f);
    e.label = label;
    e.split = split;
    return e;
}

std::vector<LabeledExample> gaussian_blobs(int per_class, double gap, std::uint64_t seed,
                                           int dim = 2) {
    Rng rng(seed);
    std::vector<LabeledExample> out;
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < per_class; ++i) {
            std::vector<float> f(dim);
            for (int j = 0; j < dim; ++j)
                f[j] = static_cast<float>(rng.gaussian() + (j == 0 ? (c ? gap : -gap) : 0.0));
            out.push_back(feat_ex(std::move(f), c));
        }
    return out;
}

LabeledExample tile_ex(std::uint8_t r, std::uint8_t g, std::uint8_t b, int label,
                       std::uint64_t noise_seed) {
    LabeledExample e;
    e.pixels = ImageU8(25, 25, 3);
    Rng rng(noise_seed);
    for (std::size_t p = 0; p < e.pixels.pixel_count(); ++p) {
        e.pixels.data[p * 3 + 0] = static_cast<std::uint8_t>(
            std::clamp(int(r) + int(rng.below(21)) - 10, 0, 255));
        e.pixels.data[p * 3 + 1] = static_cast<std::uint8_t>(
            std::clamp(int(g) + int(rng.below(21)) - 10, 0, 255));
        e.pixels.data[p * 3 + 2] = static_cast<std::uint8_t>(
            std::clamp(int(b) + int(rng.below(21)) - 10, 0, 255));
    }
    e.label = label;
    e.split = Split::train;
    return e;
}

}  // namespace

TEST_CASE("equal weights of one half give half the unweighted loss") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(32));
        nn::Mat logits(n, 2);
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) {
            logits(i, 0) = static_cast<float>(rng.uniform(-4, 4));
            logits(i, 1) = static_cast<float>(rng.uniform(-4, 4));
            labels[i] = static_cast<int>(rng.below(2));
        }
        const double unweighted = nn::softmax_cross_entropy(logits, labels);
        const double weighted = weighted_cross_entropy(logits, labels, {0.5, 0.5});
        REQUIRE(weighted == Catch::Approx(0.5 * unweighted).margin(1e-9));
    }
}

TEST_CASE("weighted loss is linear in the weights") {
    Rng rng(18);
    nn::Mat logits(16, 2);
    std::vector<int> labels(16);
    for (int i = 0; i < 16; ++i) {
        logits(i, 0) = static_cast<float>(rng.uniform(-3, 3));
        logits(i, 1) = static_cast<float>(rng.uniform(-3, 3));
        labels[i] = static_cast<int>(rng.below(2));
    }
    const LossWeights w{0.33, 0.67};
    for (double alpha : {0.25, 0.5, 2.0, 3.5}) {
        const double base = weighted_cross_entropy(logits, labels, w);
        const double scaled =
            weighted_cross_entropy(logits, labels, {alpha * w.w_crop, alpha * w.w_weed});
        REQUIRE(scaled == Catch::Approx(alpha * base).epsilon(1e-9));
    }
}

TEST_CASE("zero logits on a weed example cost 0.67 ln 2") {
    nn::Mat logits(1, 2);
    logits.setZero();
    const double loss = weighted_cross_entropy(logits, {1}, {0.33, 0.67});
    CHECK(loss == Catch::Approx(0.4644086109751634).margin(1e-6));
}

TEST_CASE("linear svm separates separable blobs perfectly") {
    auto data = gaussian_blobs(40, 6.0, 21);
    auto model = train_feature_classifier(ClassifierKind::svm_linear, data,
                                          SamplerKind::none, 3);
    int correct = 0;
    for (const auto& e : data) correct += predict(*model, e.features).label == e.label;
    CHECK(correct == static_cast<int>(data.size()));
}

TEST_CASE("gnb boundary sits at the midpoint of symmetric gaussians") {
    auto data = gaussian_blobs(400, 2.0, 22);
    auto model = train_feature_classifier(ClassifierKind::gnb, data, SamplerKind::none, 4);
    // bisect the score = 0.5 crossing along the discriminative axis
    auto score_at = [&](double x) {
        return predict(*model, std::vector<float>{static_cast<float>(x), 0.0f}).score;
    };
    double lo = -2.0, hi = 2.0;
    REQUIRE(score_at(lo) < 0.5);
    REQUIRE(score_at(hi) > 0.5);
    for (int it = 0; it < 60; ++it) {
        const double mid = (lo + hi) / 2;
        (score_at(mid) < 0.5 ? lo : hi) = mid;
    }
    CHECK(std::fabs((lo + hi) / 2) <= 0.1);
}

TEST_CASE("training is deterministic given the seed") {
    auto data = gaussian_blobs(60, 1.5, 23, 4);
    auto probe = gaussian_blobs(20, 1.5, 99, 4);
    for (auto kind : {ClassifierKind::svm_rbf, ClassifierKind::gnb, ClassifierKind::mlp,
                      ClassifierKind::random_forest}) {
        auto a = train_feature_classifier(kind, data, SamplerKind::random, 7);
        auto b = train_feature_classifier(kind, data, SamplerKind::random, 7);
        for (const auto& e : probe) {
            auto pa = predict(*a, e.features);
            auto pb = predict(*b, e.features);
            REQUIRE(pa.label == pb.label);
            REQUIRE(pa.score == pb.score);
        }
    }
}

TEST_CASE("predict label always equals score >= 0.5") {
    auto data = gaussian_blobs(50, 1.0, 24, 3);
    auto probe = gaussian_blobs(30, 1.0, 51, 3);
    for (auto kind : {ClassifierKind::svm_linear, ClassifierKind::svm_poly2,
                      ClassifierKind::svm_poly3, ClassifierKind::svm_rbf,
                      ClassifierKind::svm_sigmoid, ClassifierKind::gnb, ClassifierKind::mlp,
                      ClassifierKind::random_forest}) {
        auto model = train_feature_classifier(kind, data, SamplerKind::none, 5);
        for (const auto& e : probe) {
            auto p = predict(*model, e.features);
            REQUIRE(p.label == (p.score >= 0.5 ? 1 : 0));
        }
    }
}

TEST_CASE("all classifier kinds round-trip through their artifacts") {
    auto data = gaussian_blobs(30, 2.0, 25, 3);
    auto probe = gaussian_blobs(10, 2.0, 52, 3);
    const auto dir = std::filesystem::temp_directory_path();
    for (auto kind : {ClassifierKind::svm_linear, ClassifierKind::svm_rbf, ClassifierKind::gnb,
                      ClassifierKind::mlp, ClassifierKind::random_forest}) {
        auto model = train_feature_classifier(kind, data, SamplerKind::smote, 6);
        const auto path = (dir / (std::string("wm_cls_") + to_string(kind) + ".bin")).string();
        model->save(path);
        auto loaded = load_classifier(path);
        CHECK(loaded->kind() == kind);
        CHECK(loaded->sampler() == SamplerKind::smote);
        CHECK(loaded->training_fingerprint() == model->training_fingerprint());
        for (const auto& e : probe) {
            auto pa = predict(*model, e.features);
            auto pb = predict(*loaded, e.features);
            REQUIRE(pa.score == Catch::Approx(pb.score).margin(1e-12));
            REQUIRE(pa.label == pb.label);
        }
        std::filesystem::remove(path);
    }
}

TEST_CASE("representation mismatches are rejected") {
    auto data = gaussian_blobs(20, 3.0, 26);
    auto model = train_feature_classifier(ClassifierKind::gnb, data, SamplerKind::none, 1);
    tiling::Tile tile;
    tile.side = 25;
    tile.pixels = ImageU8(25, 25, 3);
    CHECK_THROWS_AS(predict(*model, tile), std::invalid_argument);
}

TEST_CASE("fine-tuning freezes every backbone parameter") {
    auto bb = std::make_shared<backbone::Backbone>(backbone::Backbone::make("resnet14", 5));
    const auto checksum_before = bb->checksum();

    std::vector<LabeledExample> tiles;
    for (int i = 0; i < 12; ++i) {
        tiles.push_back(tile_ex(40, 150, 50, 0, 100 + i));   // green: crop
        tiles.push_back(tile_ex(170, 40, 40, 1, 200 + i));   // red: weed
    }
    FinetuneOptions opt;
    opt.epochs = 40;
    opt.seed = 9;
    auto model = train_finetuned(tiles, bb, opt);
    CHECK(bb->checksum() == checksum_before);

    // separable toy tiles classify perfectly
    int correct = 0;
    for (int i = 0; i < 8; ++i) {
        auto crop_tile = tile_ex(40, 150, 50, 0, 300 + i);
        auto weed_tile = tile_ex(170, 40, 40, 1, 400 + i);
        correct += model->predict_tile(crop_tile.pixels).label == 0;
        correct += model->predict_tile(weed_tile.pixels).label == 1;
    }
    CHECK(correct == 16);
}

TEST_CASE("fine-tuned artifacts round-trip with their backbone recipe") {
    auto bb = std::make_shared<backbone::Backbone>(backbone::Backbone::make("resnet14", 5));
    std::vector<LabeledExample> tiles;
    for (int i = 0; i < 8; ++i) {
        tiles.push_back(tile_ex(40, 150, 50, 0, 10 + i));
        tiles.push_back(tile_ex(170, 40, 40, 1, 20 + i));
    }
    FinetuneOptions opt;
    opt.epochs = 10;
    opt.seed = 3;
    auto model = train_finetuned(tiles, bb, opt);
    const auto path =
        (std::filesystem::temp_directory_path() / "wm_finetuned_test.bin").string();
    model->save(path);
    auto loaded = load_classifier(path);  // backbone regenerated from its recipe
    auto probe = tile_ex(40, 150, 50, 0, 77);
    auto pa = model->predict_tile(probe.pixels);
    auto pb = loaded->predict_tile(probe.pixels);
    CHECK(pa.score == Catch::Approx(pb.score).margin(1e-12));
    std::filesystem::remove(path);
}

TEST_CASE("single-class fine-tuning is rejected") {
    auto bb = std::make_shared<backbone::Backbone>(backbone::Backbone::make("resnet14", 5));
    std::vector<LabeledExample> tiles;
    for (int i = 0; i < 6; ++i) tiles.push_back(tile_ex(40, 150, 50, 0, i));
    FinetuneOptions opt;
    CHECK_THROWS_AS(train_finetuned(tiles, bb, opt), std::invalid_argument);
}
