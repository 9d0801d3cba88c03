#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "weedmap/rng.hpp"

namespace weedmap::nn {

using Mat = Eigen::MatrixXf;
using Vec = Eigen::VectorXf;

// Feature map: rows = pixels in row-major (y*w + x), cols = channels.
struct FeatureMap {
    int h = 0;
    int w = 0;
    Mat m;  // (h*w) x channels

    int channels() const { return static_cast<int>(m.cols()); }
    std::size_t pixels() const { return static_cast<std::size_t>(h) * w; }
};

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Patch matrix for GEMM convolution: (out_h*out_w) x (k*k*in_c).
// Out-of-bounds taps are zero.
inline Mat im2col(const FeatureMap& in, int k, int stride, int pad, int& out_h, int& out_w) {
    const int c = in.channels();
    out_h = conv_out_dim(in.h, k, stride, pad);
    out_w = conv_out_dim(in.w, k, stride, pad);
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("im2col: kernel larger than input");
    Mat patches = Mat::Zero(static_cast<Eigen::Index>(out_h) * out_w, k * k * c);
    for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
            for (int oy = 0; oy < out_h; ++oy) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= in.h) continue;
                for (int ox = 0; ox < out_w; ++ox) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= in.w) continue;
                    patches.block(static_cast<Eigen::Index>(oy) * out_w + ox,
                                  (ky * k + kx) * c, 1, c) =
                        in.m.block(static_cast<Eigen::Index>(iy) * in.w + ix, 0, 1, c);
                }
            }
        }
    }
    return patches;
}

// Adjoint of im2col: scatter-add patch gradients back onto the input grid.
inline void col2im_add(const Mat& dpatches, int k, int stride, int pad, FeatureMap& din,
                       int out_h, int out_w) {
    const int c = din.channels();
    for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
            for (int oy = 0; oy < out_h; ++oy) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= din.h) continue;
                for (int ox = 0; ox < out_w; ++ox) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= din.w) continue;
                    din.m.block(static_cast<Eigen::Index>(iy) * din.w + ix, 0, 1, c) +=
                        dpatches.block(static_cast<Eigen::Index>(oy) * out_w + ox,
                                       (ky * k + kx) * c, 1, c);
                }
            }
        }
    }
}

struct Conv2d {
    int in_c = 0, out_c = 0, k = 1, stride = 1, pad = 0;
    Mat w;  // (k*k*in_c) x out_c
    Vec b;  // out_c

    Conv2d() = default;
    Conv2d(int in_channels, int out_channels, int kernel, int stride_, int pad_)
        : in_c(in_channels), out_c(out_channels), k(kernel), stride(stride_), pad(pad_),
          w(kernel * kernel * in_channels, out_channels), b(out_channels) {}

    // fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in))
    void init(Rng& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(k) * k * in_c);
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
        for (Eigen::Index i = 0; i < b.size(); ++i)
            b.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
    }

    FeatureMap forward(const FeatureMap& in, Mat* cache_patches = nullptr) const {
        FeatureMap out;
        Mat patches = im2col(in, k, stride, pad, out.h, out.w);
        out.m.noalias() = patches * w;
        out.m.rowwise() += b.transpose();
        if (cache_patches) *cache_patches = std::move(patches);
        return out;
    }

    // returns gradient wrt input; accumulates dw/db
    FeatureMap backward(const Mat& cached_patches, const FeatureMap& dout, int in_h, int in_w,
                        Mat& dw, Vec& db) const {
        dw.noalias() = cached_patches.transpose() * dout.m;
        db = dout.m.colwise().sum();
        FeatureMap din;
        din.h = in_h;
        din.w = in_w;
        din.m = Mat::Zero(static_cast<Eigen::Index>(in_h) * in_w, in_c);
        Mat dpatches;
        dpatches.noalias() = dout.m * w.transpose();
        col2im_add(dpatches, k, stride, pad, din, dout.h, dout.w);
        return din;
    }
};

// Per-channel standardization over all pixels of one image, with learnable
// scale/shift. This is the batch-size-1 flavor of batch normalization.
struct ChannelNorm {
    Vec gamma, beta;
    float eps = 1e-5f;

    explicit ChannelNorm(int channels = 0)
        : gamma(Vec::Ones(channels)), beta(Vec::Zero(channels)) {}

    struct Cache {
        Mat xhat;
        Vec inv_sigma;
    };

    FeatureMap forward(const FeatureMap& in, Cache* cache = nullptr) const {
        FeatureMap out;
        out.h = in.h;
        out.w = in.w;
        const auto n = static_cast<float>(in.m.rows());
        Vec mu = in.m.colwise().mean();
        Mat centered = in.m.rowwise() - mu.transpose();
        Vec var = centered.array().square().colwise().sum() / n;
        Vec inv_sigma = (var.array() + eps).rsqrt();
        Mat xhat = centered.array().rowwise() * inv_sigma.transpose().array();
        out.m = (xhat.array().rowwise() * gamma.transpose().array()).rowwise() +
                beta.transpose().array();
        if (cache) {
            cache->xhat = std::move(xhat);
            cache->inv_sigma = std::move(inv_sigma);
        }
        return out;
    }

    FeatureMap backward(const Cache& cache, const FeatureMap& dout, Vec& dgamma,
                        Vec& dbeta) const {
        const auto n = static_cast<float>(dout.m.rows());
        dgamma = (dout.m.array() * cache.xhat.array()).colwise().sum();
        dbeta = dout.m.colwise().sum();
        Mat dxhat = dout.m.array().rowwise() * gamma.transpose().array();
        Vec mean_dxhat = dxhat.colwise().mean();
        Vec mean_dxhat_xhat = (dxhat.array() * cache.xhat.array()).colwise().sum() / n;
        FeatureMap din;
        din.h = dout.h;
        din.w = dout.w;
        din.m = ((dxhat.rowwise() - mean_dxhat.transpose()).array() -
                 cache.xhat.array().rowwise() * mean_dxhat_xhat.transpose().array())
                    .rowwise() *
                cache.inv_sigma.transpose().array();
        return din;
    }
};

// Affine-free per-channel standardization to exactly zero mean / unit
// variance. Channels with variance below the guard are centered only.
struct IntraAxisNorm {
    static constexpr double variance_guard = 1e-12;

    struct Cache {
        Mat y;
        Vec inv_sigma;  // 0 marks a guarded channel
    };

    static FeatureMap forward(const FeatureMap& in, Cache* cache = nullptr) {
        FeatureMap out;
        out.h = in.h;
        out.w = in.w;
        const auto n = static_cast<float>(in.m.rows());
        Vec mu = in.m.colwise().mean();
        out.m = in.m.rowwise() - mu.transpose();
        Vec var = out.m.array().square().colwise().sum() / n;
        Vec inv_sigma(var.size());
        for (Eigen::Index c = 0; c < var.size(); ++c) {
            inv_sigma[c] = var[c] < variance_guard ? 0.0f : 1.0f / std::sqrt(var[c]);
            if (inv_sigma[c] != 0.0f) out.m.col(c) *= inv_sigma[c];
        }
        if (cache) {
            cache->y = out.m;
            cache->inv_sigma = std::move(inv_sigma);
        }
        return out;
    }

    static FeatureMap backward(const Cache& cache, const FeatureMap& dout) {
        const auto n = static_cast<float>(dout.m.rows());
        FeatureMap din;
        din.h = dout.h;
        din.w = dout.w;
        din.m.resize(dout.m.rows(), dout.m.cols());
        for (Eigen::Index c = 0; c < dout.m.cols(); ++c) {
            const float mean_dy = dout.m.col(c).mean();
            if (cache.inv_sigma[c] == 0.0f) {
                din.m.col(c) = dout.m.col(c).array() - mean_dy;
            } else {
                const float mean_dy_y = dout.m.col(c).dot(cache.y.col(c)) / n;
                din.m.col(c) = cache.inv_sigma[c] *
                               (dout.m.col(c).array() - mean_dy -
                                cache.y.col(c).array() * mean_dy_y);
            }
        }
        return din;
    }
};

inline FeatureMap relu(const FeatureMap& in) {
    FeatureMap out = in;
    out.m = out.m.cwiseMax(0.0f);
    return out;
}

inline FeatureMap relu_backward(const FeatureMap& activated, const FeatureMap& dout) {
    FeatureMap din = dout;
    din.m = (activated.m.array() > 0.0f).select(dout.m, Mat::Zero(dout.m.rows(), dout.m.cols()));
    return din;
}

inline FeatureMap max_pool(const FeatureMap& in, int k, int stride, int pad) {
    FeatureMap out;
    out.h = conv_out_dim(in.h, k, stride, pad);
    out.w = conv_out_dim(in.w, k, stride, pad);
    const int c = in.channels();
    out.m = Mat::Constant(static_cast<Eigen::Index>(out.h) * out.w, c,
                          -std::numeric_limits<float>::infinity());
    for (int oy = 0; oy < out.h; ++oy) {
        for (int ox = 0; ox < out.w; ++ox) {
            auto row = out.m.row(static_cast<Eigen::Index>(oy) * out.w + ox);
            bool any = false;
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * stride - pad + ky;
                if (iy < 0 || iy >= in.h) continue;
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * stride - pad + kx;
                    if (ix < 0 || ix >= in.w) continue;
                    row = row.cwiseMax(in.m.row(static_cast<Eigen::Index>(iy) * in.w + ix));
                    any = true;
                }
            }
            if (!any) row.setZero();
        }
    }
    return out;
}

inline Vec global_avg_pool(const FeatureMap& in) {
    return in.m.colwise().mean();
}

// Mean softmax cross-entropy over pixels; fills dlogits with the gradient.
inline double softmax_cross_entropy(const Mat& logits, const std::vector<int>& labels,
                                    Mat* dlogits = nullptr) {
    const auto n = logits.rows();
    if (static_cast<std::size_t>(n) != labels.size())
        throw std::invalid_argument("cross_entropy: label count mismatch");
    double loss = 0.0;
    if (dlogits) dlogits->resize(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        const float mx = logits.row(i).maxCoeff();
        Eigen::RowVectorXf ex = (logits.row(i).array() - mx).exp();
        const float z = ex.sum();
        loss -= static_cast<double>(logits(i, labels[i]) - mx - std::log(z));
        if (dlogits) {
            dlogits->row(i) = ex / z;
            (*dlogits)(i, labels[i]) -= 1.0f;
            dlogits->row(i) /= static_cast<float>(n);
        }
    }
    return loss / static_cast<double>(n);
}

// View of one parameter tensor and its gradient for an optimizer step.
struct ParamGrad {
    float* param = nullptr;
    const float* grad = nullptr;
    Eigen::Index size = 0;
};

template <typename M, typename G>
ParamGrad param_grad(M& param, const G& grad) {
    if (param.size() != grad.size()) throw std::logic_error("param/grad size mismatch");
    return {param.data(), grad.data(), param.size()};
}

// SGD with momentum: v = mu*v + g; w -= lr*v.
struct SgdMomentum {
    float lr = 0.1f;
    float momentum = 0.9f;
    std::vector<Vec> vel;

    void step(const std::vector<ParamGrad>& pg) {
        if (vel.empty()) {
            vel.resize(pg.size());
            for (std::size_t i = 0; i < pg.size(); ++i) vel[i] = Vec::Zero(pg[i].size);
        }
        for (std::size_t i = 0; i < pg.size(); ++i) {
            Eigen::Map<Vec> p(pg[i].param, pg[i].size);
            Eigen::Map<const Vec> g(pg[i].grad, pg[i].size);
            vel[i] = momentum * vel[i] + g;
            p -= lr * vel[i];
        }
    }
};

// Adam with the usual bias correction.
struct Adam {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    long t = 0;
    std::vector<Vec> m1, m2;

    void step(const std::vector<ParamGrad>& pg) {
        if (m1.empty()) {
            m1.resize(pg.size());
            m2.resize(pg.size());
            for (std::size_t i = 0; i < pg.size(); ++i) {
                m1[i] = Vec::Zero(pg[i].size);
                m2[i] = Vec::Zero(pg[i].size);
            }
        }
        ++t;
        const float c1 = 1.0f - std::pow(beta1, static_cast<float>(t));
        const float c2 = 1.0f - std::pow(beta2, static_cast<float>(t));
        for (std::size_t i = 0; i < pg.size(); ++i) {
            Eigen::Map<Vec> p(pg[i].param, pg[i].size);
            Eigen::Map<const Vec> g(pg[i].grad, pg[i].size);
            m1[i] = beta1 * m1[i] + (1.0f - beta1) * g;
            m2[i] = beta2 * m2[i] + (1.0f - beta2) * g.cwiseProduct(g);
            p -= (lr / c1) * (m1[i].array() / ((m2[i].array() / c2).sqrt() + eps)).matrix();
        }
    }
};

}  // namespace weedmap::nn
