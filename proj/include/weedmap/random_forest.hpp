#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "weedmap/rng.hpp"

namespace weedmap::forest {

struct ForestParams {
    int n_trees = 100;
    int max_depth = 20;
    int min_samples_split = 2;
    std::uint64_t seed = 0;
};

// Bagged CART trees with Gini splits over sqrt(d) sampled features.
class RandomForest {
public:
    struct Node {
        int feature = -1;       // -1 marks a leaf
        float threshold = 0.0f;
        int left = -1;
        int right = -1;
        float weed_prob = 0.0f;
    };

    struct Tree {
        std::vector<Node> nodes;
    };

    void train(const Eigen::MatrixXf& x, const std::vector<int>& labels, const ForestParams& p) {
        params_ = p;
        const int n = static_cast<int>(x.rows());
        const int d = static_cast<int>(x.cols());
        if (n < 2) throw std::invalid_argument("forest: need at least two examples");
        n_features_per_split_ = std::max(1, static_cast<int>(std::lround(std::sqrt(double(d)))));
        trees_.clear();
        trees_.reserve(p.n_trees);
        Rng root_rng(p.seed);
        for (int t = 0; t < p.n_trees; ++t) {
            Rng tree_rng = root_rng.fork(static_cast<std::uint64_t>(t));
            std::vector<int> boot(n);
            for (int i = 0; i < n; ++i) boot[i] = static_cast<int>(tree_rng.below(n));
            Tree tree;
            grow(tree, x, labels, boot, 0, tree_rng);
            trees_.push_back(std::move(tree));
        }
    }

    double score(const Eigen::RowVectorXf& x) const {
        if (trees_.empty()) throw std::logic_error("forest: not trained");
        double weed_votes = 0.0;
        for (const auto& tree : trees_) {
            int node = 0;
            while (tree.nodes[node].feature >= 0) {
                const Node& nd = tree.nodes[node];
                node = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
            }
            weed_votes += tree.nodes[node].weed_prob >= 0.5 ? 1.0 : 0.0;
        }
        return weed_votes / static_cast<double>(trees_.size());
    }

    const std::vector<Tree>& trees() const { return trees_; }
    const ForestParams& params() const { return params_; }
    void restore(ForestParams p, int feats, std::vector<Tree> trees) {
        params_ = p;
        n_features_per_split_ = feats;
        trees_ = std::move(trees);
    }
    int features_per_split() const { return n_features_per_split_; }

private:
    int grow(Tree& tree, const Eigen::MatrixXf& x, const std::vector<int>& labels,
             const std::vector<int>& idx, int depth, Rng& rng) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        int weed = 0;
        for (int i : idx) weed += labels[i];
        const double prob = static_cast<double>(weed) / idx.size();
        tree.nodes[id].weed_prob = static_cast<float>(prob);

        if (depth >= params_.max_depth ||
            static_cast<int>(idx.size()) < params_.min_samples_split || weed == 0 ||
            weed == static_cast<int>(idx.size())) {
            return id;
        }

        // feature subsample, then exhaustive threshold scan per feature
        const int d = static_cast<int>(x.cols());
        std::vector<int> feats(d);
        std::iota(feats.begin(), feats.end(), 0);
        shuffle(feats, rng);
        feats.resize(n_features_per_split_);

        int best_feat = -1;
        float best_thresh = 0.0f;
        double best_gini = gini(weed, static_cast<int>(idx.size()) - weed);
        std::vector<int> order;
        for (int f : feats) {
            order = idx;
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                if (x(a, f) != x(b, f)) return x(a, f) < x(b, f);
                return a < b;
            });
            int left_weed = 0;
            for (std::size_t pos = 1; pos < order.size(); ++pos) {
                left_weed += labels[order[pos - 1]];
                const float lo = x(order[pos - 1], f), hi = x(order[pos], f);
                if (lo == hi) continue;
                const int nl = static_cast<int>(pos);
                const int nr = static_cast<int>(order.size()) - nl;
                const int right_weed = weed - left_weed;
                const double g =
                    (nl * gini(left_weed, nl - left_weed) + nr * gini(right_weed, nr - right_weed)) /
                    static_cast<double>(order.size());
                if (g + 1e-12 < best_gini) {
                    best_gini = g;
                    best_feat = f;
                    best_thresh = lo + (hi - lo) / 2.0f;
                }
            }
        }
        if (best_feat < 0) return id;  // no informative split among sampled features

        std::vector<int> left_idx, right_idx;
        for (int i : idx)
            (x(i, best_feat) <= best_thresh ? left_idx : right_idx).push_back(i);
        if (left_idx.empty() || right_idx.empty()) return id;

        tree.nodes[id].feature = best_feat;
        tree.nodes[id].threshold = best_thresh;
        const int l = grow(tree, x, labels, left_idx, depth + 1, rng);
        tree.nodes[id].left = l;
        const int r = grow(tree, x, labels, right_idx, depth + 1, rng);
        tree.nodes[id].right = r;
        return id;
    }

    static double gini(int a, int b) {
        const double n = a + b;
        if (n == 0) return 0.0;
        const double pa = a / n, pb = b / n;
        return 1.0 - pa * pa - pb * pb;
    }

    ForestParams params_;
    int n_features_per_split_ = 1;
    std::vector<Tree> trees_;
};

}  // namespace weedmap::forest
