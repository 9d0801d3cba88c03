#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "weedmap/image.hpp"

namespace weedmap::metrics {

// Per-class confusion counts: x(i, j) = units of true class i predicted as j.
struct ConfusionCounts {
    int classes = 0;
    std::vector<std::int64_t> counts;  // row-major classes x classes

    explicit ConfusionCounts(int c = 0) : classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}

    std::int64_t& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth) * classes + pred]; }
    std::int64_t at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth) * classes + pred]; }

    std::int64_t total() const {
        std::int64_t t = 0;
        for (auto v : counts) t += v;
        return t;
    }

    void add(int truth, int pred, std::int64_t n = 1) {
        if (truth < 0 || truth >= classes || pred < 0 || pred >= classes)
            throw std::invalid_argument("confusion: label out of range");
        at(truth, pred) += n;
    }
};

template <typename T>
ConfusionCounts confusion_from_masks(const Image<T>& pred, const Image<T>& truth, int classes) {
    if (!pred.same_shape(truth)) throw std::invalid_argument("confusion: shape mismatch");
    ConfusionCounts cm(classes);
    for (std::size_t i = 0; i < truth.data.size(); ++i)
        cm.add(static_cast<int>(truth.data[i]), static_cast<int>(pred.data[i]));
    return cm;
}

// Mean IoU over classes. Classes absent from both prediction and truth are
// excluded from the mean.
inline double miou(const ConfusionCounts& cm) {
    double sum = 0.0;
    int used = 0;
    for (int c = 0; c < cm.classes; ++c) {
        std::int64_t row = 0, col = 0;
        for (int j = 0; j < cm.classes; ++j) {
            row += cm.at(c, j);
            col += cm.at(j, c);
        }
        const std::int64_t uni = row + col - cm.at(c, c);
        if (uni == 0) continue;  // class absent everywhere
        sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(uni);
        ++used;
    }
    return used == 0 ? 0.0 : sum / used;
}

template <typename T>
double miou(const Image<T>& pred, const Image<T>& truth, int classes) {
    return miou(confusion_from_masks(pred, truth, classes));
}

// Degenerate ratios (zero denominator) are reported as null, never as 0.
struct PrecisionRecallF1 {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    bool degenerate = false;
};

inline PrecisionRecallF1 precision_recall_f1(const ConfusionCounts& cm, int cls) {
    if (cls < 0 || cls >= cm.classes) throw std::invalid_argument("precision_recall_f1: bad class");
    std::int64_t tp = cm.at(cls, cls), fp = 0, fn = 0;
    for (int i = 0; i < cm.classes; ++i) {
        if (i == cls) continue;
        fp += cm.at(i, cls);
        fn += cm.at(cls, i);
    }
    PrecisionRecallF1 out;
    if (tp + fp > 0) out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (out.precision && out.recall && (*out.precision + *out.recall) > 0.0) {
        out.f1 = 2.0 * *out.precision * *out.recall / (*out.precision + *out.recall);
    }
    out.degenerate = !out.precision || !out.recall || !out.f1;
    return out;
}

// Error report for density estimates over correctly classified weed tiles.
// mean_accuracy can go negative when relative errors exceed 1; it is reported
// as computed, not clamped.
struct DensityErrorReport {
    std::optional<double> mean_accuracy;
    std::optional<double> mae;
    std::optional<double> rmse;
    std::size_t n = 0;
};

inline DensityErrorReport density_errors(const std::vector<std::pair<double, double>>& pairs) {
    DensityErrorReport r;
    r.n = pairs.size();
    if (pairs.empty()) return r;
    double rel = 0.0, abs_sum = 0.0, sq_sum = 0.0;
    for (const auto& [gt, est] : pairs) {
        if (gt <= 0.0) throw std::invalid_argument("density_errors: ground-truth rate must be > 0");
        const double err = std::fabs(gt - est);
        rel += err / gt;
        abs_sum += err;
        sq_sum += err * err;
    }
    const double n = static_cast<double>(pairs.size());
    r.mean_accuracy = 1.0 - rel / n;
    r.mae = abs_sum / n;
    r.rmse = std::sqrt(sq_sum / n);
    return r;
}

}  // namespace weedmap::metrics
