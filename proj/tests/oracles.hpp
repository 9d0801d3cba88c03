// Test-only reference implementations, kept deliberately naive and
// independent of the library code paths they check.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "weedmap/image.hpp"

namespace oracles {

// Brute-force confusion matrix by scanning every pixel pair-wise.
inline std::vector<std::vector<long long>> confusion(const weedmap::ImageU8& pred,
                                                     const weedmap::ImageU8& truth, int classes) {
    std::vector<std::vector<long long>> cm(classes, std::vector<long long>(classes, 0));
    for (std::size_t i = 0; i < truth.data.size(); ++i) cm[truth.data[i]][pred.data[i]] += 1;
    return cm;
}

inline double miou(const std::vector<std::vector<long long>>& cm) {
    const int classes = static_cast<int>(cm.size());
    double total = 0.0;
    int used = 0;
    for (int c = 0; c < classes; ++c) {
        long long inter = cm[c][c], row = 0, col = 0;
        for (int j = 0; j < classes; ++j) {
            row += cm[c][j];
            col += cm[j][c];
        }
        const long long uni = row + col - inter;
        if (uni == 0) continue;
        total += double(inter) / double(uni);
        ++used;
    }
    return used == 0 ? 0.0 : total / used;
}

struct Prf {
    std::optional<double> precision, recall, f1;
};

inline Prf prf(const std::vector<std::vector<long long>>& cm, int cls) {
    long long tp = cm[cls][cls], fp = 0, fn = 0;
    for (int i = 0; i < static_cast<int>(cm.size()); ++i) {
        if (i == cls) continue;
        fp += cm[i][cls];
        fn += cm[cls][i];
    }
    Prf out;
    if (tp + fp > 0) out.precision = double(tp) / double(tp + fp);
    if (tp + fn > 0) out.recall = double(tp) / double(tp + fn);
    if (out.precision && out.recall && *out.precision + *out.recall > 0)
        out.f1 = 2 * *out.precision * *out.recall / (*out.precision + *out.recall);
    return out;
}

// Flood-fill partition check: every label region must be one 4-connected
// component, labels contiguous 0..count-1, every pixel labeled.
inline bool superpixels_valid(const weedmap::ImageI32& labels, int count) {
    const int w = labels.width, h = labels.height;
    std::set<int> seen;
    for (int v : labels.data) {
        if (v < 0 || v >= count) return false;
        seen.insert(v);
    }
    if (static_cast<int>(seen.size()) != count) return false;

    std::vector<char> visited(labels.data.size(), 0);
    std::set<int> done;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < labels.data.size(); ++start) {
        if (visited[start]) continue;
        const int lab = labels.data[start];
        if (done.count(lab)) return false;  // second component of the same label
        done.insert(lab);
        stack.assign(1, start);
        visited[start] = 1;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
            const int nb[4][2] = {{px - 1, py}, {px + 1, py}, {px, py - 1}, {px, py + 1}};
            for (auto& [qx, qy] : nb) {
                if (qx < 0 || qx >= w || qy < 0 || qy >= h) continue;
                const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
                if (!visited[q] && labels.data[q] == lab) {
                    visited[q] = 1;
                    stack.push_back(q);
                }
            }
        }
    }
    return true;
}

}  // namespace oracles
