#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "weedmap/image.hpp"
#include "weedmap/imgproc.hpp"
#include "weedmap/nn.hpp"
#include "weedmap/slic.hpp"

namespace weedmap::vegseg {

constexpr int kTargetSide = 500;

// Resize to the working resolution (square, bicubic). Identity when the
// input already matches.
inline FieldImage preprocess(const ImageU8& raw, const std::string& source_id,
                             int target_side = kTargetSide) {
    if (raw.empty()) throw std::invalid_argument("preprocess: empty image");
    if (raw.channels != 3) throw std::invalid_argument("preprocess: expected 3-channel image");
    FieldImage out;
    out.source_id = source_id;
    out.resized = (raw.width != target_side || raw.height != target_side);
    out.pixels = out.resized ? resize_bicubic(raw, target_side, target_side) : raw;
    return out;
}

struct SegParams {
    double lr = 0.1;
    double momentum = 0.9;
    int max_iters = 500;
    int q = 100;          // maximum cluster count (response channels)
    int channels = 100;   // width of the three hidden conv layers
    double stop_coverage = 0.98;
    std::uint64_t seed = 0;
};

// Normalized response map of the final iteration, kept for consolidation
// and inspection.
struct ResponseMap {
    nn::FeatureMap responses;  // pixels x q, intra-axis normalized
    int iteration = 0;
};

struct SegResult {
    ImageI32 cluster_labels;  // exactly two distinct values after consolidation
    int iterations_used = 0;
    double final_loss = 0.0;
    int distinct_clusters_at_stop = 0;  // before top-2 consolidation
};

namespace detail {

// Three 3x3 conv layers (norm + ReLU each) and a 1x1 projection to q
// response channels, standardized per channel before labeling.
struct ClusterNet {
    nn::Conv2d conv1, conv2, conv3, proj;
    nn::ChannelNorm n1, n2, n3;

    ClusterNet(int channels, int q, Rng& rng)
        : conv1(3, channels, 3, 1, 1),
          conv2(channels, channels, 3, 1, 1),
          conv3(channels, channels, 3, 1, 1),
          proj(channels, q, 1, 1, 0),
          n1(channels), n2(channels), n3(channels) {
        conv1.init(rng);
        conv2.init(rng);
        conv3.init(rng);
        proj.init(rng);
    }

    struct Trace {
        nn::Mat p1, p2, p3, p4;                   // im2col caches
        nn::ChannelNorm::Cache c1, c2, c3;
        nn::IntraAxisNorm::Cache c4;
        nn::FeatureMap a1, a2, a3;                // post-ReLU activations
        int h = 0, w = 0;
    };

    nn::FeatureMap forward(const nn::FeatureMap& x, Trace& t) const {
        t.h = x.h;
        t.w = x.w;
        nn::FeatureMap z1 = conv1.forward(x, &t.p1);
        t.a1 = nn::relu(n1.forward(z1, &t.c1));
        nn::FeatureMap z2 = conv2.forward(t.a1, &t.p2);
        t.a2 = nn::relu(n2.forward(z2, &t.c2));
        nn::FeatureMap z3 = conv3.forward(t.a2, &t.p3);
        t.a3 = nn::relu(n3.forward(z3, &t.c3));
        nn::FeatureMap r = proj.forward(t.a3, &t.p4);
        return nn::IntraAxisNorm::forward(r, &t.c4);
    }

    struct Grads {
        nn::Mat w1, w2, w3, w4;
        nn::Vec b1, b2, b3, b4, g1, g2, g3, be1, be2, be3;
    };

    void backward(const Trace& t, const nn::FeatureMap& dresp, Grads& g) {
        nn::FeatureMap d = nn::IntraAxisNorm::backward(t.c4, dresp);
        nn::FeatureMap da3 = proj.backward(t.p4, d, t.h, t.w, g.w4, g.b4);
        da3 = nn::relu_backward(t.a3, da3);
        nn::FeatureMap dz3 = n3.backward(t.c3, da3, g.g3, g.be3);
        nn::FeatureMap da2 = conv3.backward(t.p3, dz3, t.h, t.w, g.w3, g.b3);
        da2 = nn::relu_backward(t.a2, da2);
        nn::FeatureMap dz2 = n2.backward(t.c2, da2, g.g2, g.be2);
        nn::FeatureMap da1 = conv2.backward(t.p2, dz2, t.h, t.w, g.w2, g.b2);
        da1 = nn::relu_backward(t.a1, da1);
        nn::FeatureMap dz1 = n1.backward(t.c1, da1, g.g1, g.be1);
        nn::Mat unused_dw;
        nn::Vec unused_db;
        conv1.backward(t.p1, dz1, t.h, t.w, unused_dw, unused_db);
        g.w1 = std::move(unused_dw);
        g.b1 = std::move(unused_db);
    }
};

inline std::vector<int> superpixel_majority(const std::vector<int>& provisional,
                                            const SuperpixelMap& sp, int q) {
    std::vector<int> refined(provisional.size());
    std::vector<std::vector<int>> hist(sp.count, std::vector<int>(q, 0));
    for (std::size_t p = 0; p < provisional.size(); ++p)
        ++hist[sp.labels.data[p]][provisional[p]];
    std::vector<int> majority(sp.count, 0);
    for (int s = 0; s < sp.count; ++s) {
        int best = 0;
        for (int c = 1; c < q; ++c)
            if (hist[s][c] > hist[s][best]) best = c;  // tie keeps the lower label
        majority[s] = best;
    }
    for (std::size_t p = 0; p < provisional.size(); ++p)
        refined[p] = majority[sp.labels.data[p]];
    return refined;
}

}  // namespace detail

// Iterative unsupervised clustering: forward pass + intra-axis normalization
// gives per-pixel provisional labels; superpixels force spatial continuity;
// the net is then trained against its own refined labels. Stops when the two
// most populous clusters cover stop_coverage of the image, when at most two
// clusters remain, or at max_iters; leftover pixels are reassigned to the
// top-2 cluster with the larger normalized response.
inline SegResult segment_unsupervised(const FieldImage& image, const SuperpixelMap& superpixels,
                                      const SegParams& params) {
    const ImageU8& px = image.pixels;
    if (superpixels.labels.width != px.width || superpixels.labels.height != px.height)
        throw std::invalid_argument("segment: superpixels not aligned to image");
    if (params.lr <= 0.0) throw std::invalid_argument("segment: lr must be positive");
    if (params.q < 2) throw std::invalid_argument("segment: q must be >= 2");
    if (params.max_iters < 1) throw std::invalid_argument("segment: max_iters must be >= 1");

    const std::size_t n_px = px.pixel_count();
    nn::FeatureMap input;
    input.h = px.height;
    input.w = px.width;
    input.m.resize(static_cast<Eigen::Index>(n_px), 3);
    for (std::size_t p = 0; p < n_px; ++p)
        for (int c = 0; c < 3; ++c)
            input.m(static_cast<Eigen::Index>(p), c) = px.data[p * 3 + c] / 255.0f;

    Rng rng(params.seed);
    detail::ClusterNet net(params.channels, params.q, rng);
    nn::SgdMomentum opt;
    opt.lr = static_cast<float>(params.lr);
    opt.momentum = static_cast<float>(params.momentum);

    std::vector<int> refined;
    nn::FeatureMap responses;
    double loss = 0.0;
    int iter = 0;
    int distinct = params.q;

    for (iter = 1; iter <= params.max_iters; ++iter) {
        detail::ClusterNet::Trace trace;
        responses = net.forward(input, trace);

        std::vector<int> provisional(n_px);
        for (std::size_t p = 0; p < n_px; ++p) {
            Eigen::Index best;
            responses.m.row(static_cast<Eigen::Index>(p)).maxCoeff(&best);
            provisional[p] = static_cast<int>(best);
        }
        refined = detail::superpixel_majority(provisional, superpixels, params.q);

        nn::Mat dlogits;
        loss = nn::softmax_cross_entropy(responses.m, refined, &dlogits);
        if (!std::isfinite(loss))
            throw std::runtime_error("segment: non-finite training loss");

        std::vector<std::int64_t> counts(params.q, 0);
        for (int r : refined) ++counts[r];
        distinct = 0;
        std::int64_t top1 = 0, top2 = 0;
        for (auto c : counts) {
            if (c == 0) continue;
            ++distinct;
            if (c > top1) {
                top2 = top1;
                top1 = c;
            } else if (c > top2) {
                top2 = c;
            }
        }
        const double coverage = static_cast<double>(top1 + top2) / static_cast<double>(n_px);
        if (distinct <= 2 || coverage >= params.stop_coverage) break;

        nn::FeatureMap dresp;
        dresp.h = input.h;
        dresp.w = input.w;
        dresp.m = std::move(dlogits);
        detail::ClusterNet::Grads g;
        net.backward(trace, dresp, g);

        opt.step({nn::param_grad(net.conv1.w, g.w1), nn::param_grad(net.conv1.b, g.b1),
                  nn::param_grad(net.conv2.w, g.w2), nn::param_grad(net.conv2.b, g.b2),
                  nn::param_grad(net.conv3.w, g.w3), nn::param_grad(net.conv3.b, g.b3),
                  nn::param_grad(net.proj.w, g.w4), nn::param_grad(net.proj.b, g.b4),
                  nn::param_grad(net.n1.gamma, g.g1), nn::param_grad(net.n1.beta, g.be1),
                  nn::param_grad(net.n2.gamma, g.g2), nn::param_grad(net.n2.beta, g.be2),
                  nn::param_grad(net.n3.gamma, g.g3), nn::param_grad(net.n3.beta, g.be3)});
    }
    if (iter > params.max_iters) iter = params.max_iters;

    SegResult out;
    out.iterations_used = iter;
    out.final_loss = loss;
    out.distinct_clusters_at_stop = distinct;

    // Consolidate to exactly two clusters. Surviving clusters are merged
    // agglomeratively on their mean chroma (Lab a/b, which is stable under
    // illumination changes), so same-material clusters split by lighting
    // collapse together long before vegetation merges with soil.
    std::vector<std::int64_t> counts(params.q, 0);
    for (int r : refined) ++counts[r];

    ImageF64 lab = rgb_to_lab(px);
    std::vector<double> mean_a(params.q, 0.0), mean_b(params.q, 0.0);
    for (std::size_t p = 0; p < n_px; ++p) {
        mean_a[refined[p]] += lab.data[p * 3 + 1];
        mean_b[refined[p]] += lab.data[p * 3 + 2];
    }

    struct Cluster {
        int id;
        std::int64_t count;
        double a, b;
    };
    std::vector<Cluster> clusters;
    for (int c = 0; c < params.q; ++c) {
        if (counts[c] == 0) continue;
        clusters.push_back({c, counts[c], mean_a[c] / counts[c], mean_b[c] / counts[c]});
    }
    std::vector<int> remap(params.q);
    for (int c = 0; c < params.q; ++c) remap[c] = c;

    while (clusters.size() > 2) {
        std::size_t bi = 0, bj = 1;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const double da = clusters[i].a - clusters[j].a;
                const double db = clusters[i].b - clusters[j].b;
                const double d = da * da + db * db;
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        Cluster& keep = clusters[bi];
        const Cluster& gone = clusters[bj];
        const double total = static_cast<double>(keep.count + gone.count);
        keep.a = (keep.a * keep.count + gone.a * gone.count) / total;
        keep.b = (keep.b * keep.count + gone.b * gone.count) / total;
        keep.count += gone.count;
        for (int c = 0; c < params.q; ++c)
            if (remap[c] == gone.id) remap[c] = keep.id;
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }

    out.cluster_labels = ImageI32(px.width, px.height, 1);
    for (std::size_t p = 0; p < n_px; ++p) out.cluster_labels.data[p] = remap[refined[p]];
    return out;
}

// The less-populous cluster becomes vegetation. On an exact tie, the cluster
// with the higher mean green-channel intensity wins.
inline VegetationMask select_vegetation(const ImageI32& cluster_labels, const ImageU8& image) {
    if (cluster_labels.pixel_count() != image.pixel_count())
        throw std::invalid_argument("select_vegetation: shape mismatch");
    int a = -1, b = -1;
    for (int lab : cluster_labels.data) {
        if (a < 0) {
            a = lab;
        } else if (lab != a) {
            if (b < 0) {
                b = lab;
            } else if (lab != b) {
                throw std::logic_error("select_vegetation: more than two clusters");
            }
        }
    }
    std::int64_t count_a = 0;
    double green_a = 0.0, green_b = 0.0;
    const std::size_t n = cluster_labels.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        if (cluster_labels.data[p] == a) {
            ++count_a;
            green_a += image.data[p * 3 + 1];
        } else {
            green_b += image.data[p * 3 + 1];
        }
    }
    const std::int64_t count_b = static_cast<std::int64_t>(n) - count_a;

    int veg;
    if (b < 0) {
        veg = a;  // degenerate single-cluster image: everything is vegetation
    } else if (count_a != count_b) {
        veg = count_a < count_b ? a : b;
    } else {
        veg = (green_a / count_a >= green_b / count_b) ? a : b;
    }

    ImageU8 mask(cluster_labels.width, cluster_labels.height, 1);
    for (std::size_t p = 0; p < n; ++p) mask.data[p] = cluster_labels.data[p] == veg ? 1 : 0;
    return make_vegetation_mask(std::move(mask));
}

}  // namespace weedmap::vegseg
