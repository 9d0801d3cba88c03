#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "weedmap/rng.hpp"

namespace weedmap::svm {

enum class Kernel : std::uint8_t { linear = 0, poly2 = 1, poly3 = 2, rbf = 3, sigmoid = 4 };

inline const char* to_string(Kernel k) {
    switch (k) {
        case Kernel::linear: return "linear";
        case Kernel::poly2: return "poly2";
        case Kernel::poly3: return "poly3";
        case Kernel::rbf: return "rbf";
        case Kernel::sigmoid: return "sigmoid";
    }
    return "?";
}

struct SvmParams {
    Kernel kernel = Kernel::linear;
    double C = 1.0;
    double coef0 = 0.0;
    double tol = 1e-3;
    int max_epochs = 200;
    std::uint64_t seed = 0;
};

// C-SVC trained with sequential minimal optimization (the simplified Platt
// variant with a max-|E_i - E_j| partner heuristic). Deterministic given the
// seed; gamma follows the common 1/(d * var(X)) scaling.
class SvmModel {
public:
    SvmModel() = default;

    void train(const Eigen::MatrixXf& x, const std::vector<int>& labels, const SvmParams& p) {
        const int n = static_cast<int>(x.rows());
        if (n < 2) throw std::invalid_argument("svm: need at least two examples");
        params_ = p;
        const double var = (x.rowwise() - x.colwise().mean()).array().square().mean();
        gamma_ = var > 0 ? 1.0 / (static_cast<double>(x.cols()) * var) : 1.0;

        Eigen::MatrixXd k(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j)
                k(i, j) = k(j, i) = kernel(x.row(i), x.row(j));

        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y[i] = labels[i] == 1 ? 1.0 : -1.0;

        Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
        double b = 0.0;
        // error cache: err[i] = f(x_i) - y_i, maintained incrementally
        Eigen::VectorXd err = -y;

        Rng rng(p.seed);
        int passes = 0, epoch = 0;
        while (passes < 3 && epoch < p.max_epochs) {
            int changed = 0;
            for (int i = 0; i < n; ++i) {
                const double ei = err[i];
                if (!((y[i] * ei < -p.tol && alpha[i] < p.C) ||
                      (y[i] * ei > p.tol && alpha[i] > 0)))
                    continue;
                // partner with the largest error gap; random fallback on ties
                int j = -1;
                double best = -1.0;
                for (int cand = 0; cand < n; ++cand) {
                    if (cand == i) continue;
                    const double gap = std::fabs(ei - err[cand]);
                    if (gap > best) {
                        best = gap;
                        j = cand;
                    }
                }
                if (j < 0) j = static_cast<int>(rng.below(n));
                const double ej = err[j];
                const double ai_old = alpha[i], aj_old = alpha[j];
                double lo, hi;
                if (y[i] != y[j]) {
                    lo = std::max(0.0, aj_old - ai_old);
                    hi = std::min(p.C, p.C + aj_old - ai_old);
                } else {
                    lo = std::max(0.0, ai_old + aj_old - p.C);
                    hi = std::min(p.C, ai_old + aj_old);
                }
                if (lo >= hi) continue;
                const double eta = 2.0 * k(i, j) - k(i, i) - k(j, j);
                if (eta >= 0) continue;
                double aj = aj_old - y[j] * (ei - ej) / eta;
                aj = std::min(hi, std::max(lo, aj));
                if (std::fabs(aj - aj_old) < 1e-7) continue;
                const double ai = ai_old + y[i] * y[j] * (aj_old - aj);
                const double b_old = b;
                const double b1 = b - ei - y[i] * (ai - ai_old) * k(i, i) -
                                  y[j] * (aj - aj_old) * k(i, j);
                const double b2 = b - ej - y[i] * (ai - ai_old) * k(i, j) -
                                  y[j] * (aj - aj_old) * k(j, j);
                if (ai > 0 && ai < p.C) {
                    b = b1;
                } else if (aj > 0 && aj < p.C) {
                    b = b2;
                } else {
                    b = (b1 + b2) / 2.0;
                }
                alpha[i] = ai;
                alpha[j] = aj;
                err += y[i] * (ai - ai_old) * k.col(i) + y[j] * (aj - aj_old) * k.col(j);
                err.array() += b - b_old;
                ++changed;
            }
            passes = changed == 0 ? passes + 1 : 0;
            ++epoch;
        }

        bias_ = b;
        support_.resize(0, x.cols());
        coeff_.resize(0);
        for (int i = 0; i < n; ++i) {
            if (alpha[i] <= 1e-12) continue;
            support_.conservativeResize(support_.rows() + 1, Eigen::NoChange);
            support_.row(support_.rows() - 1) = x.row(i);
            coeff_.conservativeResize(coeff_.size() + 1);
            coeff_[coeff_.size() - 1] = alpha[i] * y[i];
        }
    }

    double decision(const Eigen::RowVectorXf& x) const {
        double d = bias_;
        for (Eigen::Index i = 0; i < support_.rows(); ++i)
            d += coeff_[i] * kernel(support_.row(i), x);
        return d;
    }

    // margin squashed to (0,1); the 0.5 threshold matches decision >= 0
    double score(const Eigen::RowVectorXf& x) const {
        return 1.0 / (1.0 + std::exp(-decision(x)));
    }

    const SvmParams& params() const { return params_; }
    double gamma() const { return gamma_; }
    double bias() const { return bias_; }
    const Eigen::MatrixXf& support_vectors() const { return support_; }
    const Eigen::VectorXd& coefficients() const { return coeff_; }

    void restore(SvmParams p, double gamma, double bias, Eigen::MatrixXf support,
                 Eigen::VectorXd coeff) {
        params_ = p;
        gamma_ = gamma;
        bias_ = bias;
        support_ = std::move(support);
        coeff_ = std::move(coeff);
    }

private:
    double kernel(const Eigen::RowVectorXf& a, const Eigen::RowVectorXf& b) const {
        const double dot = static_cast<double>(a.dot(b));
        switch (params_.kernel) {
            case Kernel::linear: return dot;
            case Kernel::poly2: return std::pow(gamma_ * dot + params_.coef0, 2.0);
            case Kernel::poly3: return std::pow(gamma_ * dot + params_.coef0, 3.0);
            case Kernel::rbf: {
                const double d2 = static_cast<double>((a - b).squaredNorm());
                return std::exp(-gamma_ * d2);
            }
            case Kernel::sigmoid: return std::tanh(gamma_ * dot + params_.coef0);
        }
        return dot;
    }

    SvmParams params_;
    double gamma_ = 1.0;
    double bias_ = 0.0;
    Eigen::MatrixXf support_;
    Eigen::VectorXd coeff_;
};

}  // namespace weedmap::svm
