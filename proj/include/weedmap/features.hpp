#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "weedmap/backbone.hpp"
#include "weedmap/serialize.hpp"
#include "weedmap/tiling.hpp"
#include "weedmap/util.hpp"

namespace weedmap::features {

enum class Split : std::uint8_t { train = 0, test = 1 };

struct FeatureVector {
    std::vector<float> values;
    int tile_row = 0;
    int tile_col = 0;
    Split split = Split::train;

    std::size_t length() const { return values.size(); }
};

// Flattened activation of the backbone's stride-16 stage (channel-major).
// 50x50 tiles give 4x4x1024 = 16384 values; other sides give whatever
// length that stage produces, recorded on the vector itself.
inline FeatureVector extract_features(const tiling::Tile& tile, const backbone::Backbone& bb) {
    nn::FeatureMap fm = bb.forward_stride16(tile.pixels);
    FeatureVector out;
    out.tile_row = tile.row;
    out.tile_col = tile.col;
    out.values.resize(static_cast<std::size_t>(fm.m.size()));
    std::size_t i = 0;
    for (int c = 0; c < fm.channels(); ++c)
        for (std::size_t p = 0; p < fm.pixels(); ++p)
            out.values[i++] = fm.m(static_cast<Eigen::Index>(p), c);
    return out;
}

struct PcaModel {
    Eigen::VectorXd mean;        // input_dim
    Eigen::MatrixXd components;  // k x input_dim, orthonormal rows
    int k = 0;
    int input_dim = 0;
    int requested_k = 0;
    bool clamped = false;
    std::uint64_t training_fingerprint = 0;

    static constexpr std::uint32_t kMagic = 0x574d5043;  // "WMPC"

    void save(const std::string& path) const {
        serialize::json meta;
        meta["kind"] = "pca";
        meta["k"] = k;
        meta["input_dim"] = input_dim;
        meta["requested_k"] = requested_k;
        meta["clamped"] = clamped;
        meta["training_fingerprint"] = hex64(training_fingerprint);
        serialize::Writer w(path, kMagic, 1, meta);
        w.write_blob_f64(mean.data(), static_cast<std::size_t>(mean.size()));
        w.write_blob_f64(components.data(), static_cast<std::size_t>(components.size()));
        w.finish();
    }

    static PcaModel load(const std::string& path) {
        serialize::Reader r(path, kMagic, 1);
        const auto& meta = r.metadata();
        PcaModel m;
        m.k = meta.at("k").get<int>();
        m.input_dim = meta.at("input_dim").get<int>();
        m.requested_k = meta.value("requested_k", m.k);
        m.clamped = meta.value("clamped", false);
        m.training_fingerprint =
            std::stoull(meta.value("training_fingerprint", std::string("0")), nullptr, 16);
        m.mean.resize(m.input_dim);
        r.read_blob_f64(m.mean.data(), static_cast<std::size_t>(m.mean.size()));
        m.components.resize(m.k, m.input_dim);
        r.read_blob_f64(m.components.data(), static_cast<std::size_t>(m.components.size()));
        return m;
    }
};

// Exact PCA of the training vectors. Works on the d x d covariance when the
// dimension is small, otherwise on the n x n Gram matrix (same span, cheaper
// for wide vectors). k is clamped to the achievable rank with a note in the
// model rather than an error. Component signs follow a fixed convention:
// the largest-magnitude coordinate of each component is positive.
inline PcaModel fit_pca(const std::vector<FeatureVector>& train_vectors, int requested_k) {
    if (train_vectors.size() < 2)
        throw std::invalid_argument("fit_pca: need at least two training vectors");
    for (const auto& v : train_vectors)
        if (v.split != Split::train)
            throw std::logic_error("fit_pca: test-split vector leaked into training");
    const int n = static_cast<int>(train_vectors.size());
    const int d = static_cast<int>(train_vectors.front().length());
    for (const auto& v : train_vectors)
        if (static_cast<int>(v.length()) != d)
            throw std::invalid_argument("fit_pca: inconsistent vector lengths");
    if (requested_k < 1) throw std::invalid_argument("fit_pca: k must be positive");

    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = train_vectors[i].values[j];

    std::uint64_t fp = 0xcbf29ce484222325ULL;
    for (const auto& v : train_vectors) fp = fnv1a(v.values.data(), v.values.size() * 4, fp);

    PcaModel model;
    model.input_dim = d;
    model.requested_k = requested_k;
    model.training_fingerprint = fp;
    model.mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();

    int k = std::min(requested_k, std::min(n, d));
    model.clamped = k != requested_k;

    Eigen::MatrixXd comps;
    Eigen::VectorXd eigvals;
    if (d <= n) {
        Eigen::MatrixXd cov = centered.transpose() * centered / double(n - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        // eigenvalues ascending; take the top k in descending order
        comps.resize(k, d);
        eigvals.resize(k);
        for (int i = 0; i < k; ++i) {
            comps.row(i) = es.eigenvectors().col(d - 1 - i).transpose();
            eigvals[i] = es.eigenvalues()[d - 1 - i];
        }
    } else {
        Eigen::MatrixXd gram = centered * centered.transpose() / double(n - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        comps.resize(k, d);
        eigvals.resize(k);
        int kept = 0;
        const double floor = std::max(1e-12, es.eigenvalues().maxCoeff() * 1e-10);
        for (int i = 0; i < k; ++i) {
            const double lambda = es.eigenvalues()[n - 1 - i];
            if (lambda < floor) break;  // numerically rank-deficient beyond here
            comps.row(kept) =
                (centered.transpose() * es.eigenvectors().col(n - 1 - i)).transpose();
            comps.row(kept) /= comps.row(kept).norm();
            eigvals[kept] = lambda;
            ++kept;
        }
        if (kept < k) {
            comps.conservativeResize(kept, d);
            eigvals.conservativeResize(kept);
            k = kept;
            model.clamped = true;
        }
    }

    // deterministic sign: largest-magnitude coordinate positive
    for (int i = 0; i < k; ++i) {
        Eigen::Index arg;
        comps.row(i).cwiseAbs().maxCoeff(&arg);
        if (comps(i, arg) < 0) comps.row(i) = -comps.row(i);
    }
    model.components = std::move(comps);
    model.k = k;
    return model;
}

inline FeatureVector project(const PcaModel& model, const FeatureVector& v) {
    if (static_cast<int>(v.length()) != model.input_dim)
        throw std::invalid_argument("project: vector length does not match model input dim");
    Eigen::VectorXd x(model.input_dim);
    for (int i = 0; i < model.input_dim; ++i) x[i] = v.values[i];
    Eigen::VectorXd y = model.components * (x - model.mean);
    FeatureVector out;
    out.tile_row = v.tile_row;
    out.tile_col = v.tile_col;
    out.split = v.split;
    out.values.resize(static_cast<std::size_t>(model.k));
    for (int i = 0; i < model.k; ++i) out.values[i] = static_cast<float>(y[i]);
    return out;
}

// Test-side reconstruction helper for exactness checks.
inline FeatureVector reconstruct(const PcaModel& model, const FeatureVector& projected) {
    if (static_cast<int>(projected.length()) != model.k)
        throw std::invalid_argument("reconstruct: length does not match model k");
    Eigen::VectorXd y(model.k);
    for (int i = 0; i < model.k; ++i) y[i] = projected.values[i];
    Eigen::VectorXd x = model.components.transpose() * y + model.mean;
    FeatureVector out;
    out.tile_row = projected.tile_row;
    out.tile_col = projected.tile_col;
    out.split = projected.split;
    out.values.resize(static_cast<std::size_t>(model.input_dim));
    for (int i = 0; i < model.input_dim; ++i) out.values[i] = static_cast<float>(x[i]);
    return out;
}

}  // namespace weedmap::features
