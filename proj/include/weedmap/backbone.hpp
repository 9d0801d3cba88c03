#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "weedmap/image.hpp"
#include "weedmap/nn.hpp"
#include "weedmap/serialize.hpp"
#include "weedmap/util.hpp"

namespace weedmap::backbone {

// ImageNet channel statistics; inputs are normalized the same way the
// backbone's pretraining pipeline normalized them.
constexpr std::array<float, 3> kInputMean{0.485f, 0.456f, 0.406f};
constexpr std::array<float, 3> kInputStd{0.229f, 0.224f, 0.225f};

// Frozen batch normalization (inference form).
struct BatchNormFrozen {
    nn::Vec gamma, beta, mean, var;
    float eps = 1e-5f;

    explicit BatchNormFrozen(int channels = 0)
        : gamma(nn::Vec::Ones(channels)),
          beta(nn::Vec::Zero(channels)),
          mean(nn::Vec::Zero(channels)),
          var(nn::Vec::Ones(channels)) {}

    void apply(nn::FeatureMap& x) const {
        const nn::Vec scale = gamma.array() / (var.array() + eps).sqrt();
        const nn::Vec shift = beta.array() - mean.array() * scale.array();
        x.m = (x.m.array().rowwise() * scale.transpose().array()).rowwise() +
              shift.transpose().array();
    }
};

// Standard bottleneck residual unit: 1x1 reduce, 3x3, 1x1 expand, with a
// strided 1x1 projection on the shortcut when shape changes.
struct Bottleneck {
    nn::Conv2d reduce, spatial, expand;
    BatchNormFrozen bn1, bn2, bn3;
    bool has_projection = false;
    nn::Conv2d projection;
    BatchNormFrozen bn_proj;

    Bottleneck() = default;
    Bottleneck(int in_c, int mid_c, int out_c, int stride)
        : reduce(in_c, mid_c, 1, 1, 0),
          spatial(mid_c, mid_c, 3, stride, 1),
          expand(mid_c, out_c, 1, 1, 0),
          bn1(mid_c), bn2(mid_c), bn3(out_c) {
        if (stride != 1 || in_c != out_c) {
            has_projection = true;
            projection = nn::Conv2d(in_c, out_c, 1, stride, 0);
            bn_proj = BatchNormFrozen(out_c);
        }
    }

    nn::FeatureMap forward(const nn::FeatureMap& x) const {
        nn::FeatureMap y = reduce.forward(x);
        bn1.apply(y);
        y = nn::relu(y);
        y = spatial.forward(y);
        bn2.apply(y);
        y = nn::relu(y);
        y = expand.forward(y);
        bn3.apply(y);
        nn::FeatureMap shortcut;
        if (has_projection) {
            shortcut = projection.forward(x);
            bn_proj.apply(shortcut);
        } else {
            shortcut = x;
        }
        y.m += shortcut.m;
        return nn::relu(y);
    }
};

// Bottleneck-residual classification backbone. Two presets share the stage
// widths, so the stride-16 feature tap is 1024 channels in both:
//   resnet50 — blocks (3,4,6,3), the standard layout
//   resnet14 — blocks (1,1,1,1), a light stand-in with identical plumbing
struct Backbone {
    std::string arch;
    std::uint64_t init_seed = 0;
    std::string weight_provenance;  // "seeded-surrogate" or container origin
    nn::Conv2d stem;
    BatchNormFrozen stem_bn;
    std::vector<std::vector<Bottleneck>> stages;

    static std::vector<int> blocks_for(const std::string& arch) {
        if (arch == "resnet50") return {3, 4, 6, 3};
        if (arch == "resnet14") return {1, 1, 1, 1};
        throw std::invalid_argument("unknown backbone arch: " + arch);
    }

    static Backbone make(const std::string& arch, std::uint64_t seed) {
        Backbone bb;
        bb.arch = arch;
        bb.init_seed = seed;
        bb.weight_provenance = "seeded-surrogate";
        const auto blocks = blocks_for(arch);
        bb.stem = nn::Conv2d(3, 64, 7, 2, 3);
        bb.stem_bn = BatchNormFrozen(64);
        int in_c = 64;
        const int mids[4] = {64, 128, 256, 512};
        for (int s = 0; s < 4; ++s) {
            std::vector<Bottleneck> stage;
            const int out_c = mids[s] * 4;
            for (int b = 0; b < blocks[s]; ++b) {
                const int stride = (b == 0 && s > 0) ? 2 : 1;
                stage.emplace_back(in_c, mids[s], out_c, stride);
                in_c = out_c;
            }
            bb.stages.push_back(std::move(stage));
        }
        // surrogate weights: He-scaled gaussian convs, identity batch norms
        Rng rng(seed);
        bb.for_each_tensor([&](float* p, std::size_t n, TensorRole role) {
            switch (role) {
                case TensorRole::conv_weight:
                    for (std::size_t i = 0; i < n; ++i)
                        p[i] = static_cast<float>(rng.gaussian());
                    break;
                case TensorRole::conv_bias:
                case TensorRole::bn_beta:
                case TensorRole::bn_mean:
                    for (std::size_t i = 0; i < n; ++i) p[i] = 0.0f;
                    break;
                case TensorRole::bn_gamma:
                case TensorRole::bn_var:
                    for (std::size_t i = 0; i < n; ++i) p[i] = 1.0f;
                    break;
            }
        });
        bb.visit_convs([&](nn::Conv2d& c) {
            c.w *= std::sqrt(2.0f / (static_cast<float>(c.k) * c.k * c.in_c));
        });
        return bb;
    }

    enum class TensorRole { conv_weight, conv_bias, bn_gamma, bn_beta, bn_mean, bn_var };

    template <typename Fn>
    void visit_convs(Fn&& fn) {
        fn(stem);
        for (auto& stage : stages)
            for (auto& b : stage) {
                fn(b.reduce);
                fn(b.spatial);
                fn(b.expand);
                if (b.has_projection) fn(b.projection);
            }
    }

    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        auto conv = [&](nn::Conv2d& c) {
            fn(c.w.data(), static_cast<std::size_t>(c.w.size()), TensorRole::conv_weight);
            fn(c.b.data(), static_cast<std::size_t>(c.b.size()), TensorRole::conv_bias);
        };
        auto bn = [&](BatchNormFrozen& b) {
            fn(b.gamma.data(), static_cast<std::size_t>(b.gamma.size()), TensorRole::bn_gamma);
            fn(b.beta.data(), static_cast<std::size_t>(b.beta.size()), TensorRole::bn_beta);
            fn(b.mean.data(), static_cast<std::size_t>(b.mean.size()), TensorRole::bn_mean);
            fn(b.var.data(), static_cast<std::size_t>(b.var.size()), TensorRole::bn_var);
        };
        conv(stem);
        bn(stem_bn);
        for (auto& stage : stages)
            for (auto& blk : stage) {
                conv(blk.reduce);
                bn(blk.bn1);
                conv(blk.spatial);
                bn(blk.bn2);
                conv(blk.expand);
                bn(blk.bn3);
                if (blk.has_projection) {
                    conv(blk.projection);
                    bn(blk.bn_proj);
                }
            }
    }

    std::uint64_t checksum() {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for_each_tensor([&](float* p, std::size_t n, TensorRole) { h = fnv1a(p, n * 4, h); });
        return h;
    }

    nn::FeatureMap to_input(const ImageU8& tile) const {
        if (tile.channels != 3) throw std::invalid_argument("backbone: expected RGB tile");
        nn::FeatureMap in;
        in.h = tile.height;
        in.w = tile.width;
        in.m.resize(static_cast<Eigen::Index>(tile.pixel_count()), 3);
        for (std::size_t p = 0; p < tile.pixel_count(); ++p)
            for (int c = 0; c < 3; ++c)
                in.m(static_cast<Eigen::Index>(p), c) =
                    (tile.data[p * 3 + c] / 255.0f - kInputMean[c]) / kInputStd[c];
        return in;
    }

    nn::FeatureMap forward_stem(const ImageU8& tile) const {
        nn::FeatureMap x = stem.forward(to_input(tile));
        stem_bn.apply(x);
        x = nn::relu(x);
        return nn::max_pool(x, 3, 2, 1);
    }

    // Activation of the residual stage with cumulative stride 16
    // (1024 channels; 4x4 spatial on a 50x50 input).
    nn::FeatureMap forward_stride16(const ImageU8& tile) const {
        nn::FeatureMap x = forward_stem(tile);
        for (int s = 0; s < 3; ++s)
            for (const auto& b : stages[s]) x = b.forward(x);
        return x;
    }

    // Pooled output of the final stage (2048 values), the input to the
    // classification head.
    nn::Vec forward_pooled(const ImageU8& tile) const {
        nn::FeatureMap x = forward_stem(tile);
        for (const auto& stage : stages)
            for (const auto& b : stage) x = b.forward(x);
        return nn::global_avg_pool(x);
    }

    static constexpr std::uint32_t kMagic = 0x574d4242;  // "WMBB"

    void save(const std::string& path) {
        serialize::json meta;
        meta["kind"] = "backbone";
        meta["arch"] = arch;
        meta["init_seed"] = init_seed;
        meta["provenance"] = weight_provenance;
        meta["checksum"] = hex64(checksum());
        serialize::Writer w(path, kMagic, 1, meta);
        std::uint32_t count = 0;
        for_each_tensor([&](float*, std::size_t, TensorRole) { ++count; });
        w.write_u32(count);
        for_each_tensor([&](float* p, std::size_t n, TensorRole) { w.write_blob(p, n); });
        w.finish();
    }

    static Backbone load(const std::string& path) {
        serialize::Reader r(path, kMagic, 1);
        const auto& meta = r.metadata();
        Backbone bb = make(meta.at("arch").get<std::string>(),
                           meta.value("init_seed", std::uint64_t{0}));
        bb.weight_provenance = meta.value("provenance", std::string("container"));
        std::uint32_t count = r.read_u32();
        std::uint32_t expected = 0;
        bb.for_each_tensor([&](float*, std::size_t, TensorRole) { ++expected; });
        if (count != expected) throw serialize::FormatError("backbone tensor count mismatch");
        bb.for_each_tensor([&](float* p, std::size_t n, TensorRole) { r.read_blob(p, n); });
        return bb;
    }
};

}  // namespace weedmap::backbone
