#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "weedmap/backbone.hpp"
#include "weedmap/features.hpp"
#include "weedmap/image.hpp"
#include "weedmap/mlp.hpp"
#include "weedmap/nn.hpp"
#include "weedmap/random_forest.hpp"
#include "weedmap/rng.hpp"
#include "weedmap/serialize.hpp"
#include "weedmap/svm.hpp"
#include "weedmap/tiling.hpp"
#include "weedmap/util.hpp"

namespace weedmap::classify {

using features::Split;

enum class ClassifierKind : std::uint8_t {
    svm_linear,
    svm_poly2,
    svm_poly3,
    svm_rbf,
    svm_sigmoid,
    gnb,
    mlp,
    random_forest,
    finetuned_backbone,
};

enum class SamplerKind : std::uint8_t { none, random, smote };

inline const char* to_string(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::svm_linear: return "svm_linear";
        case ClassifierKind::svm_poly2: return "svm_poly2";
        case ClassifierKind::svm_poly3: return "svm_poly3";
        case ClassifierKind::svm_rbf: return "svm_rbf";
        case ClassifierKind::svm_sigmoid: return "svm_sigmoid";
        case ClassifierKind::gnb: return "gnb";
        case ClassifierKind::mlp: return "mlp";
        case ClassifierKind::random_forest: return "random_forest";
        case ClassifierKind::finetuned_backbone: return "finetuned_backbone";
    }
    return "?";
}

inline ClassifierKind classifier_kind_from_string(const std::string& s) {
    for (auto k : {ClassifierKind::svm_linear, ClassifierKind::svm_poly2,
                   ClassifierKind::svm_poly3, ClassifierKind::svm_rbf,
                   ClassifierKind::svm_sigmoid, ClassifierKind::gnb, ClassifierKind::mlp,
                   ClassifierKind::random_forest, ClassifierKind::finetuned_backbone})
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown classifier kind: " + s);
}

inline const char* to_string(SamplerKind s) {
    switch (s) {
        case SamplerKind::none: return "none";
        case SamplerKind::random: return "random";
        case SamplerKind::smote: return "smote";
    }
    return "?";
}

inline SamplerKind sampler_kind_from_string(const std::string& s) {
    for (auto k : {SamplerKind::none, SamplerKind::random, SamplerKind::smote})
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown sampler kind: " + s);
}

// One training/evaluation unit: a PCA-reduced feature vector for the
// feature-classifier path, or masked tile pixels for the fine-tuned path.
struct LabeledExample {
    std::vector<float> features;
    ImageU8 pixels;
    int label = 0;  // 0 = crop, 1 = weed
    Split split = Split::train;
};

struct LossWeights {
    double w_crop = 0.33;
    double w_weed = 0.67;
};

namespace detail {

template <typename Example>
void require_train_only(const std::vector<Example>& examples, const char* who) {
    for (const auto& e : examples)
        if (e.split != Split::train)
            throw std::logic_error(std::string(who) + ": test-split example in resampling input");
}

template <typename Example>
std::pair<std::vector<int>, std::vector<int>> class_indices(const std::vector<Example>& ex) {
    std::pair<std::vector<int>, std::vector<int>> out;
    for (int i = 0; i < static_cast<int>(ex.size()); ++i)
        (ex[i].label == 0 ? out.first : out.second).push_back(i);
    return out;
}

}  // namespace detail

// Combined random over/undersampling: both classes meet at the midpoint of
// the two class counts. Only train-split examples are eligible.
template <typename Example>
std::vector<Example> resample_random(const std::vector<Example>& examples, std::uint64_t seed) {
    detail::require_train_only(examples, "resample_random");
    auto [crop_idx, weed_idx] = detail::class_indices(examples);
    if (crop_idx.empty() || weed_idx.empty())
        throw std::invalid_argument("resample_random: both classes must be present");

    const std::size_t target = (crop_idx.size() + weed_idx.size()) / 2;
    Rng rng(seed);
    auto resample_class = [&](const std::vector<int>& idx) {
        std::vector<int> out;
        if (idx.size() == target) {
            out = idx;
        } else if (idx.size() > target) {
            // undersample without replacement
            std::vector<int> pool = idx;
            shuffle(pool, rng);
            out.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(target));
        } else {
            // oversample with replacement
            out = idx;
            while (out.size() < target)
                out.push_back(idx[rng.below(idx.size())]);
        }
        return out;
    };
    std::vector<int> crop_sel = resample_class(crop_idx);
    std::vector<int> weed_sel = resample_class(weed_idx);

    std::vector<Example> out;
    out.reserve(crop_sel.size() + weed_sel.size());
    for (int i : crop_sel) out.push_back(examples[i]);
    for (int i : weed_sel) out.push_back(examples[i]);
    return out;
}

// SMOTE: synthetic minority vectors on segments toward one of the k nearest
// minority neighbors, generated until the classes balance.
inline std::vector<LabeledExample> resample_smote(const std::vector<LabeledExample>& examples,
                                                  int k_neighbors, std::uint64_t seed) {
    detail::require_train_only(examples, "resample_smote");
    auto [crop_idx, weed_idx] = detail::class_indices(examples);
    if (crop_idx.empty() || weed_idx.empty())
        throw std::invalid_argument("resample_smote: both classes must be present");
    for (const auto& e : examples)
        if (e.features.empty())
            throw std::invalid_argument("resample_smote: needs feature vectors");

    const bool weed_minority = weed_idx.size() < crop_idx.size();
    const auto& minority = weed_minority ? weed_idx : crop_idx;
    const auto& majority = weed_minority ? crop_idx : weed_idx;
    if (static_cast<int>(minority.size()) <= k_neighbors)
        throw std::invalid_argument(
            "resample_smote: minority class has too few samples for k=" +
            std::to_string(k_neighbors) + "; use a smaller k_neighbors");

    // k nearest minority neighbors of each minority point (excluding itself)
    const int m = static_cast<int>(minority.size());
    std::vector<std::vector<int>> knn(m);
    for (int i = 0; i < m; ++i) {
        std::vector<std::pair<double, int>> dist;
        dist.reserve(m - 1);
        const auto& a = examples[minority[i]].features;
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            const auto& b = examples[minority[j]].features;
            double d = 0.0;
            for (std::size_t f = 0; f < a.size(); ++f) {
                const double diff = double(a[f]) - double(b[f]);
                d += diff * diff;
            }
            dist.emplace_back(d, j);
        }
        std::sort(dist.begin(), dist.end());
        for (int t = 0; t < k_neighbors; ++t) knn[i].push_back(dist[t].second);
    }

    std::vector<LabeledExample> out = examples;
    Rng rng(seed);
    const std::size_t need = majority.size() - minority.size();
    for (std::size_t s = 0; s < need; ++s) {
        const int i = static_cast<int>(s % m);
        const int nn = knn[i][rng.below(static_cast<std::uint64_t>(k_neighbors))];
        const double u = rng.uniform();
        const auto& base = examples[minority[i]];
        const auto& towards = examples[minority[nn]];
        LabeledExample synth;
        synth.label = base.label;
        synth.split = Split::train;
        synth.features.resize(base.features.size());
        for (std::size_t f = 0; f < base.features.size(); ++f)
            synth.features[f] = static_cast<float>(
                base.features[f] + u * (double(towards.features[f]) - base.features[f]));
        out.push_back(std::move(synth));
    }
    return out;
}

// Per-class weighted softmax cross-entropy, averaged over the batch without
// weight renormalization, so loss(alpha * w) = alpha * loss(w) and equal
// weights of 0.5 give exactly half the unweighted loss.
inline double weighted_cross_entropy(const nn::Mat& logits, const std::vector<int>& labels,
                                     const LossWeights& w, nn::Mat* dlogits = nullptr) {
    const auto n = logits.rows();
    if (static_cast<std::size_t>(n) != labels.size())
        throw std::invalid_argument("weighted_cross_entropy: label count mismatch");
    if (w.w_crop <= 0.0 || w.w_weed <= 0.0)
        throw std::invalid_argument("weighted_cross_entropy: weights must be positive");
    if (dlogits) dlogits->resize(logits.rows(), logits.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double wc = labels[i] == 0 ? w.w_crop : w.w_weed;
        const float mx = logits.row(i).maxCoeff();
        Eigen::RowVectorXf ex = (logits.row(i).array() - mx).exp();
        const float z = ex.sum();
        loss += wc * -(logits(i, labels[i]) - mx - std::log(z));
        if (dlogits) {
            dlogits->row(i) = ex / z;
            (*dlogits)(i, labels[i]) -= 1.0f;
            dlogits->row(i) *= static_cast<float>(wc / static_cast<double>(n));
        }
    }
    return loss / static_cast<double>(n);
}

struct Prediction {
    int label = 0;      // 1 = weed
    double score = 0.0; // weed-class probability or squashed decision value
};

inline Prediction make_prediction(double score) {
    return {score >= 0.5 ? 1 : 0, score};
}

class Classifier {
public:
    virtual ~Classifier() = default;

    ClassifierKind kind() const { return kind_; }
    SamplerKind sampler() const { return sampler_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t training_fingerprint() const { return fingerprint_; }

    virtual Prediction predict_features(const std::vector<float>&) const {
        throw std::invalid_argument(std::string(to_string(kind_)) +
                                    ": expects tile pixels, got a feature vector");
    }
    virtual Prediction predict_tile(const ImageU8&) const {
        throw std::invalid_argument(std::string(to_string(kind_)) +
                                    ": expects a feature vector, got tile pixels");
    }
    virtual void save(const std::string& path) const = 0;

protected:
    Classifier(ClassifierKind k, SamplerKind s, std::uint64_t seed, std::uint64_t fp)
        : kind_(k), sampler_(s), seed_(seed), fingerprint_(fp) {}

    serialize::json base_metadata() const {
        serialize::json meta;
        meta["kind"] = to_string(kind_);
        meta["sampler"] = to_string(sampler_);
        meta["seed"] = seed_;
        meta["training_fingerprint"] = hex64(fingerprint_);
        return meta;
    }

    ClassifierKind kind_;
    SamplerKind sampler_;
    std::uint64_t seed_ = 0;
    std::uint64_t fingerprint_ = 0;
};

constexpr std::uint32_t kClassifierMagic = 0x574d434c;  // "WMCL"

namespace detail {

inline std::uint64_t fingerprint_examples(const std::vector<LabeledExample>& ex) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& e : ex) {
        h = fnv1a(e.features.data(), e.features.size() * 4, h);
        h = fnv1a(e.pixels.data.data(), e.pixels.data.size(), h);
        h = fnv1a(&e.label, sizeof(e.label), h);
    }
    return h;
}

inline Eigen::MatrixXf feature_matrix(const std::vector<LabeledExample>& ex) {
    if (ex.empty()) throw std::invalid_argument("classifier: empty training set");
    const std::size_t d = ex.front().features.size();
    if (d == 0) throw std::invalid_argument("classifier: examples carry no feature vectors");
    Eigen::MatrixXf x(ex.size(), d);
    for (std::size_t i = 0; i < ex.size(); ++i) {
        if (ex[i].features.size() != d)
            throw std::invalid_argument("classifier: inconsistent feature lengths");
        for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), j) = ex[i].features[j];
    }
    return x;
}

inline std::vector<int> label_vector(const std::vector<LabeledExample>& ex) {
    std::vector<int> y(ex.size());
    for (std::size_t i = 0; i < ex.size(); ++i) y[i] = ex[i].label;
    return y;
}

}  // namespace detail

// Gaussian naive Bayes with a variance floor against degenerate features.
class GnbClassifier final : public Classifier {
public:
    GnbClassifier(const Eigen::MatrixXf& x, const std::vector<int>& y, SamplerKind sampler,
                  std::uint64_t seed, std::uint64_t fp)
        : Classifier(ClassifierKind::gnb, sampler, seed, fp) {
        const int d = static_cast<int>(x.cols());
        mean_.resize(2, d);
        var_.resize(2, d);
        prior_.resize(2);
        double max_var = 0.0;
        for (int c = 0; c < 2; ++c) {
            std::vector<int> idx;
            for (int i = 0; i < static_cast<int>(y.size()); ++i)
                if (y[i] == c) idx.push_back(i);
            if (idx.empty()) throw std::invalid_argument("gnb: a class is missing");
            prior_[c] = double(idx.size()) / double(y.size());
            for (int j = 0; j < d; ++j) {
                double m = 0.0;
                for (int i : idx) m += x(i, j);
                m /= idx.size();
                double v = 0.0;
                for (int i : idx) v += (x(i, j) - m) * (x(i, j) - m);
                v /= idx.size();
                mean_(c, j) = m;
                var_(c, j) = v;
                max_var = std::max(max_var, v);
            }
        }
        // variance floor; keeps log-densities finite on constant features
        var_floor_ = std::max(1e-9 * max_var, 1e-12);
        var_ = var_.cwiseMax(var_floor_);
    }

    GnbClassifier(SamplerKind sampler, std::uint64_t seed, std::uint64_t fp)
        : Classifier(ClassifierKind::gnb, sampler, seed, fp) {}

    Prediction predict_features(const std::vector<float>& f) const override {
        if (static_cast<Eigen::Index>(f.size()) != mean_.cols())
            throw std::invalid_argument("gnb: feature length mismatch");
        double logp[2];
        for (int c = 0; c < 2; ++c) {
            double lp = std::log(prior_[c]);
            for (Eigen::Index j = 0; j < mean_.cols(); ++j) {
                const double diff = f[j] - mean_(c, j);
                lp += -0.5 * (std::log(2.0 * M_PI * var_(c, j)) + diff * diff / var_(c, j));
            }
            logp[c] = lp;
        }
        const double m = std::max(logp[0], logp[1]);
        const double z = std::exp(logp[0] - m) + std::exp(logp[1] - m);
        return make_prediction(std::exp(logp[1] - m) / z);
    }

    void save(const std::string& path) const override {
        auto meta = base_metadata();
        meta["input_dim"] = mean_.cols();
        meta["var_floor"] = var_floor_;
        serialize::Writer w(path, kClassifierMagic, 1, meta);
        w.write_blob_f64(prior_.data(), 2);
        w.write_blob_f64(mean_.data(), static_cast<std::size_t>(mean_.size()));
        w.write_blob_f64(var_.data(), static_cast<std::size_t>(var_.size()));
        w.finish();
    }

    void restore(serialize::Reader& r) {
        const int d = r.metadata().at("input_dim").get<int>();
        var_floor_ = r.metadata().value("var_floor", 1e-12);
        prior_.resize(2);
        mean_.resize(2, d);
        var_.resize(2, d);
        r.read_blob_f64(prior_.data(), 2);
        r.read_blob_f64(mean_.data(), static_cast<std::size_t>(mean_.size()));
        r.read_blob_f64(var_.data(), static_cast<std::size_t>(var_.size()));
    }

private:
    Eigen::MatrixXd mean_, var_;
    Eigen::VectorXd prior_;
    double var_floor_ = 1e-12;
};

class SvmClassifier final : public Classifier {
public:
    SvmClassifier(ClassifierKind kind, const Eigen::MatrixXf& x, const std::vector<int>& y,
                  SamplerKind sampler, std::uint64_t seed, std::uint64_t fp)
        : Classifier(kind, sampler, seed, fp) {
        svm::SvmParams p;
        p.kernel = kernel_of(kind);
        p.seed = seed;
        model_.train(x, y, p);
    }

    SvmClassifier(ClassifierKind kind, SamplerKind sampler, std::uint64_t seed, std::uint64_t fp)
        : Classifier(kind, sampler, seed, fp) {}

    static svm::Kernel kernel_of(ClassifierKind kind) {
        switch (kind) {
            case ClassifierKind::svm_linear: return svm::Kernel::linear;
            case ClassifierKind::svm_poly2: return svm::Kernel::poly2;
            case ClassifierKind::svm_poly3: return svm::Kernel::poly3;
            case ClassifierKind::svm_rbf: return svm::Kernel::rbf;
            case ClassifierKind::svm_sigmoid: return svm::Kernel::sigmoid;
            default: throw std::invalid_argument("not an svm kind");
        }
    }

    Prediction predict_features(const std::vector<float>& f) const override {
        Eigen::RowVectorXf x(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) x[i] = f[i];
        return make_prediction(model_.score(x));
    }

    void save(const std::string& path) const override {
        auto meta = base_metadata();
        meta["C"] = model_.params().C;
        meta["coef0"] = model_.params().coef0;
        meta["gamma"] = model_.gamma();
        meta["bias"] = model_.bias();
        meta["n_support"] = model_.support_vectors().rows();
        meta["input_dim"] = model_.support_vectors().cols();
        serialize::Writer w(path, kClassifierMagic, 1, meta);
        w.write_blob(model_.support_vectors().data(),
                     static_cast<std::size_t>(model_.support_vectors().size()));
        w.write_blob_f64(model_.coefficients().data(),
                         static_cast<std::size_t>(model_.coefficients().size()));
        w.finish();
    }

    void restore(serialize::Reader& r) {
        const auto& meta = r.metadata();
        svm::SvmParams p;
        p.kernel = kernel_of(kind_);
        p.C = meta.at("C").get<double>();
        p.coef0 = meta.at("coef0").get<double>();
        p.seed = seed_;
        const auto n_sv = meta.at("n_support").get<Eigen::Index>();
        const auto d = meta.at("input_dim").get<Eigen::Index>();
        Eigen::MatrixXf support(n_sv, d);
        r.read_blob(support.data(), static_cast<std::size_t>(support.size()));
        Eigen::VectorXd coeff(n_sv);
        r.read_blob_f64(coeff.data(), static_cast<std::size_t>(coeff.size()));
        model_.restore(p, meta.at("gamma").get<double>(), meta.at("bias").get<double>(),
                       std::move(support), std::move(coeff));
    }

private:
    svm::SvmModel model_;
};

class ForestClassifier final : public Classifier {
public:
    ForestClassifier(const Eigen::MatrixXf& x, const std::vector<int>& y, SamplerKind sampler,
                     std::uint64_t seed, std::uint64_t fp)
        : Classifier(ClassifierKind::random_forest, sampler, seed, fp) {
        forest::ForestParams p;
        p.seed = seed;
        model_.train(x, y, p);
    }

    ForestClassifier(SamplerKind sampler, std::uint64_t seed, std::uint64_t fp)
        : Classifier(ClassifierKind::random_forest, sampler, seed, fp) {}

    Prediction predict_features(const std::vector<float>& f) const override {
        Eigen::RowVectorXf x(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) x[i] = f[i];
        return make_prediction(model_.score(x));
    }

    void save(const std::string& path) const override {
        auto meta = base_metadata();
        meta["n_trees"] = model_.params().n_trees;
        meta["max_depth"] = model_.params().max_depth;
        meta["features_per_split"] = model_.features_per_split();
        serialize::json sizes = serialize::json::array();
        for (const auto& t : model_.trees()) sizes.push_back(t.nodes.size());
        meta["tree_sizes"] = sizes;
        serialize::Writer w(path, kClassifierMagic, 1, meta);
        for (const auto& t : model_.trees()) {
            std::vector<float> flat;
            flat.reserve(t.nodes.size() * 5);
            for (const auto& nd : t.nodes) {
                flat.push_back(static_cast<float>(nd.feature));
                flat.push_back(nd.threshold);
                flat.push_back(static_cast<float>(nd.left));
                flat.push_back(static_cast<float>(nd.right));
                flat.push_back(nd.weed_prob);
            }
            w.write_blob(flat);
        }
        w.finish();
    }

    void restore(serialize::Reader& r) {
        const auto& meta = r.metadata();
        forest::ForestParams p;
        p.n_trees = meta.at("n_trees").get<int>();
        p.max_depth = meta.at("max_depth").get<int>();
        p.seed = seed_;
        std::vector<forest::RandomForest::Tree> trees;
        for (const auto& sz : meta.at("tree_sizes")) {
            auto flat = r.read_blob();
            if (flat.size() != sz.get<std::size_t>() * 5)
                throw serialize::FormatError("forest: tree blob mismatch");
            forest::RandomForest::Tree t;
            t.nodes.resize(flat.size() / 5);
            for (std::size_t i = 0; i < t.nodes.size(); ++i) {
                t.nodes[i].feature = static_cast<int>(flat[i * 5 + 0]);
                t.nodes[i].threshold = flat[i * 5 + 1];
                t.nodes[i].left = static_cast<int>(flat[i * 5 + 2]);
                t.nodes[i].right = static_cast<int>(flat[i * 5 + 3]);
                t.nodes[i].weed_prob = flat[i * 5 + 4];
            }
            trees.push_back(std::move(t));
        }
        model_.restore(p, meta.at("features_per_split").get<int>(), std::move(trees));
    }

private:
    forest::RandomForest model_;
};

class MlpClassifier final : public Classifier {
public:
    MlpClassifier(const Eigen::MatrixXf& x, const std::vector<int>& y, SamplerKind sampler,
                  std::uint64_t seed, std::uint64_t fp)
        : Classifier(ClassifierKind::mlp, sampler, seed, fp) {
        mlp::MlpParams p;
        p.seed = seed;
        model_.train(x, y, p);
    }

    MlpClassifier(SamplerKind sampler, std::uint64_t seed, std::uint64_t fp)
        : Classifier(ClassifierKind::mlp, sampler, seed, fp) {}

    Prediction predict_features(const std::vector<float>& f) const override {
        Eigen::RowVectorXf x(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) x[i] = f[i];
        return make_prediction(model_.score(x));
    }

    void save(const std::string& path) const override {
        auto meta = base_metadata();
        serialize::json dims = serialize::json::array();
        for (const auto& w : model_.weights()) dims.push_back({w.rows(), w.cols()});
        meta["layer_dims"] = dims;
        serialize::Writer w(path, kClassifierMagic, 1, meta);
        for (std::size_t l = 0; l < model_.weights().size(); ++l) {
            w.write_blob(model_.weights()[l].data(),
                         static_cast<std::size_t>(model_.weights()[l].size()));
            w.write_blob(model_.biases()[l].data(),
                         static_cast<std::size_t>(model_.biases()[l].size()));
        }
        w.finish();
    }

    void restore(serialize::Reader& r) {
        std::vector<nn::Mat> ws;
        std::vector<nn::Vec> bs;
        for (const auto& dim : r.metadata().at("layer_dims")) {
            nn::Mat w(dim[0].get<Eigen::Index>(), dim[1].get<Eigen::Index>());
            r.read_blob(w.data(), static_cast<std::size_t>(w.size()));
            nn::Vec b(w.cols());
            r.read_blob(b.data(), static_cast<std::size_t>(b.size()));
            ws.push_back(std::move(w));
            bs.push_back(std::move(b));
        }
        mlp::MlpParams p;
        p.seed = seed_;
        model_.restore(p, std::move(ws), std::move(bs));
    }

private:
    mlp::Mlp model_;
};

// Frozen backbone with a trained 2-class head on the pooled features.
class FinetunedClassifier final : public Classifier {
public:
    FinetunedClassifier(std::shared_ptr<const backbone::Backbone> bb, nn::Mat head_w,
                        nn::Vec head_b, LossWeights weights, int epochs, double lr,
                        SamplerKind sampler, std::uint64_t seed, std::uint64_t fp)
        : Classifier(ClassifierKind::finetuned_backbone, sampler, seed, fp),
          backbone_(std::move(bb)),
          head_w_(std::move(head_w)),
          head_b_(std::move(head_b)),
          weights_(weights),
          epochs_(epochs),
          lr_(lr) {}

    Prediction predict_tile(const ImageU8& tile) const override {
        nn::Vec pooled = backbone_->forward_pooled(tile);
        return make_prediction(head_score(pooled));
    }

    double head_score(const nn::Vec& pooled) const {
        Eigen::RowVector2f logits = pooled.transpose() * head_w_ + head_b_.transpose();
        const float m = logits.maxCoeff();
        const double e0 = std::exp(logits[0] - m), e1 = std::exp(logits[1] - m);
        return e1 / (e0 + e1);
    }

    const backbone::Backbone& bb() const { return *backbone_; }
    const nn::Mat& head_weights() const { return head_w_; }
    const nn::Vec& head_bias() const { return head_b_; }

    void save(const std::string& path) const override {
        auto meta = base_metadata();
        meta["backbone_arch"] = backbone_->arch;
        meta["backbone_seed"] = backbone_->init_seed;
        meta["backbone_provenance"] = backbone_->weight_provenance;
        meta["backbone_checksum"] =
            hex64(const_cast<backbone::Backbone&>(*backbone_).checksum());
        meta["w_crop"] = weights_.w_crop;
        meta["w_weed"] = weights_.w_weed;
        meta["epochs"] = epochs_;
        meta["lr"] = lr_;
        serialize::Writer w(path, kClassifierMagic, 1, meta);
        w.write_blob(head_w_.data(), static_cast<std::size_t>(head_w_.size()));
        w.write_blob(head_b_.data(), static_cast<std::size_t>(head_b_.size()));
        w.finish();
    }

    static std::unique_ptr<FinetunedClassifier> restore(
        serialize::Reader& r, SamplerKind sampler, std::uint64_t seed, std::uint64_t fp,
        std::shared_ptr<const backbone::Backbone> bb) {
        const auto& meta = r.metadata();
        if (!bb) {
            // seeded surrogates are reproducible from their recipe
            if (meta.value("backbone_provenance", std::string()) != "seeded-surrogate")
                throw std::invalid_argument(
                    "finetuned model needs its backbone weights; pass the backbone artifact");
            bb = std::make_shared<backbone::Backbone>(backbone::Backbone::make(
                meta.at("backbone_arch").get<std::string>(),
                meta.at("backbone_seed").get<std::uint64_t>()));
        }
        const std::string want = meta.value("backbone_checksum", std::string());
        if (!want.empty() &&
            want != hex64(const_cast<backbone::Backbone&>(*bb).checksum()))
            throw std::invalid_argument("finetuned model: backbone checksum mismatch");
        nn::Mat head_w(2048, 2);
        r.read_blob(head_w.data(), static_cast<std::size_t>(head_w.size()));
        nn::Vec head_b(2);
        r.read_blob(head_b.data(), static_cast<std::size_t>(head_b.size()));
        LossWeights weights{meta.at("w_crop").get<double>(), meta.at("w_weed").get<double>()};
        return std::make_unique<FinetunedClassifier>(
            std::move(bb), std::move(head_w), std::move(head_b), weights,
            meta.at("epochs").get<int>(), meta.at("lr").get<double>(), sampler, seed, fp);
    }

private:
    std::shared_ptr<const backbone::Backbone> backbone_;
    nn::Mat head_w_;  // 2048 x 2
    nn::Vec head_b_;  // 2
    LossWeights weights_;
    int epochs_ = 0;
    double lr_ = 0.0;
};

inline std::unique_ptr<Classifier> train_feature_classifier(
    ClassifierKind kind, const std::vector<LabeledExample>& train, SamplerKind sampler,
    std::uint64_t seed) {
    if (train.empty()) throw std::invalid_argument("train_feature_classifier: empty training set");
    std::vector<LabeledExample> data;
    switch (sampler) {
        case SamplerKind::none: data = train; break;
        case SamplerKind::random: data = resample_random(train, seed); break;
        case SamplerKind::smote: data = resample_smote(train, 5, seed); break;
    }
    auto [crop_idx, weed_idx] = detail::class_indices(data);
    if (crop_idx.empty() || weed_idx.empty())
        throw std::invalid_argument("train_feature_classifier: both classes must be present");

    const Eigen::MatrixXf x = detail::feature_matrix(data);
    const std::vector<int> y = detail::label_vector(data);
    const std::uint64_t fp = detail::fingerprint_examples(data);

    switch (kind) {
        case ClassifierKind::gnb:
            return std::make_unique<GnbClassifier>(x, y, sampler, seed, fp);
        case ClassifierKind::mlp:
            return std::make_unique<MlpClassifier>(x, y, sampler, seed, fp);
        case ClassifierKind::random_forest:
            return std::make_unique<ForestClassifier>(x, y, sampler, seed, fp);
        case ClassifierKind::svm_linear:
        case ClassifierKind::svm_poly2:
        case ClassifierKind::svm_poly3:
        case ClassifierKind::svm_rbf:
        case ClassifierKind::svm_sigmoid:
            return std::make_unique<SvmClassifier>(kind, x, y, sampler, seed, fp);
        case ClassifierKind::finetuned_backbone:
            throw std::invalid_argument(
                "finetuned_backbone is trained with train_finetuned, not on feature vectors");
    }
    throw std::invalid_argument("unknown classifier kind");
}

struct FinetuneOptions {
    LossWeights weights{};
    int epochs = 250;
    double lr = 0.001;
    int batch_size = 32;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

// Trains only the 2-class replacement head on pooled backbone features of the
// masked tiles; every backbone parameter stays frozen.
inline std::unique_ptr<FinetunedClassifier> train_finetuned(
    const std::vector<LabeledExample>& train_tiles,
    std::shared_ptr<const backbone::Backbone> bb, const FinetuneOptions& opt) {
    if (train_tiles.empty()) throw std::invalid_argument("train_finetuned: empty training set");
    if (opt.epochs < 1) throw std::invalid_argument("train_finetuned: epochs must be >= 1");
    auto [crop_idx, weed_idx] = detail::class_indices(train_tiles);
    if (crop_idx.empty() || weed_idx.empty())
        throw std::invalid_argument("train_finetuned: both classes must be present");
    for (const auto& e : train_tiles)
        if (e.pixels.empty())
            throw std::invalid_argument("train_finetuned: examples carry no tile pixels");

    const int n = static_cast<int>(train_tiles.size());
    // the backbone is frozen, so pooled features are computed once
    Eigen::MatrixXf pooled(n, 2048);
    parallel_for(static_cast<std::size_t>(n), opt.workers, [&](std::size_t i) {
        pooled.row(static_cast<Eigen::Index>(i)) =
            bb->forward_pooled(train_tiles[i].pixels).transpose();
    });
    std::vector<int> y = detail::label_vector(train_tiles);

    Rng rng(opt.seed);
    nn::Mat head_w(2048, 2);
    const double bound = 1.0 / std::sqrt(2048.0);
    for (Eigen::Index i = 0; i < head_w.size(); ++i)
        head_w.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
    nn::Vec head_b(2);
    head_b[0] = static_cast<float>(rng.uniform(-bound, bound));
    head_b[1] = static_cast<float>(rng.uniform(-bound, bound));

    nn::SgdMomentum sgd;
    sgd.lr = static_cast<float>(opt.lr);
    sgd.momentum = static_cast<float>(opt.momentum);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(opt.seed ^ 0x8badf00dULL);

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        shuffle(order, shuffle_rng);
        for (int start = 0; start < n; start += opt.batch_size) {
            const int bs = std::min(opt.batch_size, n - start);
            Eigen::MatrixXf xb(bs, 2048);
            std::vector<int> yb(bs);
            for (int i = 0; i < bs; ++i) {
                xb.row(i) = pooled.row(order[start + i]);
                yb[i] = y[order[start + i]];
            }
            nn::Mat logits = xb * head_w;
            logits.rowwise() += head_b.transpose();
            nn::Mat dlogits;
            weighted_cross_entropy(logits, yb, opt.weights, &dlogits);
            nn::Mat dw = xb.transpose() * dlogits;
            nn::Vec db = dlogits.colwise().sum();
            sgd.step({nn::param_grad(head_w, dw), nn::param_grad(head_b, db)});
        }
    }

    std::uint64_t fp = detail::fingerprint_examples(train_tiles);
    return std::make_unique<FinetunedClassifier>(std::move(bb), std::move(head_w),
                                                 std::move(head_b), opt.weights, opt.epochs,
                                                 opt.lr, SamplerKind::none, opt.seed, fp);
}

inline Prediction predict(const Classifier& model, const std::vector<float>& features) {
    return model.predict_features(features);
}

inline Prediction predict(const Classifier& model, const tiling::Tile& tile) {
    return model.predict_tile(tile.pixels);
}

inline std::unique_ptr<Classifier> load_classifier(
    const std::string& path, std::shared_ptr<const backbone::Backbone> bb = nullptr) {
    serialize::Reader r(path, kClassifierMagic, 1);
    const auto& meta = r.metadata();
    const ClassifierKind kind = classifier_kind_from_string(meta.at("kind").get<std::string>());
    const SamplerKind sampler = sampler_kind_from_string(meta.at("sampler").get<std::string>());
    const auto seed = meta.at("seed").get<std::uint64_t>();
    const std::uint64_t fp =
        std::stoull(meta.value("training_fingerprint", std::string("0")), nullptr, 16);

    switch (kind) {
        case ClassifierKind::gnb: {
            auto m = std::make_unique<GnbClassifier>(sampler, seed, fp);
            m->restore(r);
            return m;
        }
        case ClassifierKind::mlp: {
            auto m = std::make_unique<MlpClassifier>(sampler, seed, fp);
            m->restore(r);
            return m;
        }
        case ClassifierKind::random_forest: {
            auto m = std::make_unique<ForestClassifier>(sampler, seed, fp);
            m->restore(r);
            return m;
        }
        case ClassifierKind::svm_linear:
        case ClassifierKind::svm_poly2:
        case ClassifierKind::svm_poly3:
        case ClassifierKind::svm_rbf:
        case ClassifierKind::svm_sigmoid: {
            auto m = std::make_unique<SvmClassifier>(kind, sampler, seed, fp);
            m->restore(r);
            return m;
        }
        case ClassifierKind::finetuned_backbone:
            return FinetunedClassifier::restore(r, sampler, seed, fp, std::move(bb));
    }
    throw std::invalid_argument("unknown classifier kind in artifact");
}

}  // namespace weedmap::classify
