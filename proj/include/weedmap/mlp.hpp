#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "weedmap/nn.hpp"
#include "weedmap/rng.hpp"

namespace weedmap::mlp {

struct MlpParams {
    std::vector<int> hidden{1024, 512, 256, 128, 64, 32};
    int batch_size = 32;
    int epochs = 100;
    float lr = 1e-3f;
    int patience = 10;         // epochs without improvement before stopping
    double min_improvement = 1e-5;
    std::uint64_t seed = 0;
};

// Six-hidden-layer perceptron with ReLU activations and one sigmoid output
// neuron, trained on binary cross-entropy with adaptive-moment updates.
class Mlp {
public:
    void train(const Eigen::MatrixXf& x, const std::vector<int>& labels, const MlpParams& p) {
        const int n = static_cast<int>(x.rows());
        if (n < 1) throw std::invalid_argument("mlp: empty training set");
        params_ = p;
        init(static_cast<int>(x.cols()), p);

        nn::Adam opt;
        opt.lr = p.lr;
        Rng shuffle_rng(p.seed ^ 0x5171f00dULL);
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;

        double best_loss = std::numeric_limits<double>::infinity();
        int stale = 0;
        for (int epoch = 0; epoch < p.epochs; ++epoch) {
            shuffle(order, shuffle_rng);
            double epoch_loss = 0.0;
            int batches = 0;
            for (int start = 0; start < n; start += p.batch_size) {
                const int bs = std::min(p.batch_size, n - start);
                Eigen::MatrixXf xb(bs, x.cols());
                Eigen::VectorXf yb(bs);
                for (int i = 0; i < bs; ++i) {
                    xb.row(i) = x.row(order[start + i]);
                    yb[i] = static_cast<float>(labels[order[start + i]]);
                }
                epoch_loss += step(xb, yb, opt);
                ++batches;
            }
            epoch_loss /= batches;
            if (epoch_loss < best_loss - p.min_improvement) {
                best_loss = epoch_loss;
                stale = 0;
            } else if (++stale >= p.patience) {
                break;  // training loss plateaued
            }
        }
    }

    double score(const Eigen::RowVectorXf& x) const {
        Eigen::RowVectorXf a = x;
        for (std::size_t l = 0; l < w_.size(); ++l) {
            Eigen::RowVectorXf z = a * w_[l] + b_[l].transpose();
            a = l + 1 < w_.size() ? z.cwiseMax(0.0f) : z;
        }
        return 1.0 / (1.0 + std::exp(-static_cast<double>(a[0])));
    }

    const std::vector<nn::Mat>& weights() const { return w_; }
    const std::vector<nn::Vec>& biases() const { return b_; }
    const MlpParams& params() const { return params_; }
    void restore(MlpParams p, std::vector<nn::Mat> w, std::vector<nn::Vec> b) {
        params_ = std::move(p);
        w_ = std::move(w);
        b_ = std::move(b);
    }

private:
    void init(int input_dim, const MlpParams& p) {
        Rng rng(p.seed);
        w_.clear();
        b_.clear();
        std::vector<int> dims;
        dims.push_back(input_dim);
        for (int h : p.hidden) dims.push_back(h);
        dims.push_back(1);
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
            nn::Mat w(dims[l], dims[l + 1]);
            for (Eigen::Index i = 0; i < w.size(); ++i)
                w.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
            nn::Vec b(dims[l + 1]);
            for (Eigen::Index i = 0; i < b.size(); ++i)
                b[i] = static_cast<float>(rng.uniform(-bound, bound));
            w_.push_back(std::move(w));
            b_.push_back(std::move(b));
        }
    }

    double step(const Eigen::MatrixXf& xb, const Eigen::VectorXf& yb, nn::Adam& opt) {
        const int bs = static_cast<int>(xb.rows());
        std::vector<Eigen::MatrixXf> act;  // post-activation per layer
        act.reserve(w_.size() + 1);
        act.push_back(xb);
        for (std::size_t l = 0; l < w_.size(); ++l) {
            Eigen::MatrixXf z = act.back() * w_[l];
            z.rowwise() += b_[l].transpose();
            act.push_back(l + 1 < w_.size() ? z.cwiseMax(0.0f).eval() : z);
        }
        // sigmoid + BCE
        Eigen::ArrayXf logit = act.back().col(0).array();
        Eigen::ArrayXf prob = 1.0f / (1.0f + (-logit).exp());
        double loss = 0.0;
        for (int i = 0; i < bs; ++i) {
            const double pr = std::clamp(static_cast<double>(prob[i]), 1e-7, 1.0 - 1e-7);
            loss -= yb[i] > 0.5f ? std::log(pr) : std::log(1.0 - pr);
        }
        loss /= bs;

        Eigen::MatrixXf delta = ((prob - yb.array()) / static_cast<float>(bs)).matrix();
        std::vector<nn::Mat> dw(w_.size());
        std::vector<nn::Vec> db(w_.size());
        for (int l = static_cast<int>(w_.size()) - 1; l >= 0; --l) {
            dw[l].noalias() = act[l].transpose() * delta;
            db[l] = delta.colwise().sum();
            if (l > 0) {
                Eigen::MatrixXf prev = delta * w_[l].transpose();
                delta = (act[l].array() > 0.0f).select(prev, 0.0f);
            }
        }
        std::vector<nn::ParamGrad> pg;
        for (std::size_t l = 0; l < w_.size(); ++l) {
            pg.push_back(nn::param_grad(w_[l], dw[l]));
            pg.push_back(nn::param_grad(b_[l], db[l]));
        }
        opt.step(pg);
        return loss;
    }

    MlpParams params_;
    std::vector<nn::Mat> w_;
    std::vector<nn::Vec> b_;
};

}  // namespace weedmap::mlp
