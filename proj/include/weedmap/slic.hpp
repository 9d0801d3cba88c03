#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "weedmap/image.hpp"
#include "weedmap/imgproc.hpp"

namespace weedmap {

// Superpixel partition of an image. Labels are contiguous 0..count-1 and each
// superpixel is 4-connected after enforcement.
struct SuperpixelMap {
    ImageI32 labels;  // H x W x 1
    int count = 0;
    double compactness = 0.0;
};

namespace detail {

struct SlicCenter {
    double l = 0, a = 0, b = 0, x = 0, y = 0;
};

// Make every label region 4-connected: the largest component of each label
// is kept ("settled"); every orphan fragment is absorbed by the largest
// settled region adjacent to it. Fragments whose whole boundary is pending
// are first unioned with a pending neighbor, so the loop always terminates
// with all pixels settled.
inline void enforce_connectivity(ImageI32& labels, int& count) {
    const int w = labels.width, h = labels.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;

    std::vector<int> comp(n, -1);
    std::vector<std::size_t> comp_size;
    std::vector<int> comp_label;
    std::vector<std::size_t> stack;
    int n_comp = 0;
    for (std::size_t start = 0; start < n; ++start) {
        if (comp[start] >= 0) continue;
        const int lab = labels.data[start];
        comp[start] = n_comp;
        stack.assign(1, start);
        std::size_t size = 0;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            ++size;
            const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
            const int nb[4][2] = {{px - 1, py}, {px + 1, py}, {px, py - 1}, {px, py + 1}};
            for (auto& [qx, qy] : nb) {
                if (qx < 0 || qx >= w || qy < 0 || qy >= h) continue;
                const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
                if (comp[q] < 0 && labels.data[q] == lab) {
                    comp[q] = n_comp;
                    stack.push_back(q);
                }
            }
        }
        comp_size.push_back(size);
        comp_label.push_back(lab);
        ++n_comp;
    }

    int max_label = 0;
    for (int c = 0; c < n_comp; ++c) max_label = std::max(max_label, comp_label[c]);
    std::vector<int> main_comp(max_label + 1, -1);
    for (int c = 0; c < n_comp; ++c) {
        const int lab = comp_label[c];
        if (main_comp[lab] < 0 || comp_size[c] > comp_size[main_comp[lab]]) main_comp[lab] = c;
    }

    // settled_into[c] = root main-component id, or -1 while pending
    std::vector<int> settled_into(n_comp, -1);
    std::vector<std::size_t> region_size(n_comp, 0);
    for (int lab = 0; lab <= max_label; ++lab) {
        if (main_comp[lab] >= 0) {
            settled_into[main_comp[lab]] = main_comp[lab];
            region_size[main_comp[lab]] = comp_size[main_comp[lab]];
        }
    }

    struct Group {
        std::vector<std::size_t> pixels;
    };
    std::vector<Group> pending;
    std::vector<int> group_of(n_comp, -1);
    {
        std::vector<std::vector<std::size_t>> comp_pixels(n_comp);
        for (std::size_t p = 0; p < n; ++p)
            if (settled_into[comp[p]] < 0) comp_pixels[comp[p]].push_back(p);
        for (int c = 0; c < n_comp; ++c) {
            if (settled_into[c] >= 0 || comp_pixels[c].empty()) continue;
            group_of[c] = static_cast<int>(pending.size());
            pending.push_back({std::move(comp_pixels[c])});
        }
    }

    auto group_order = [&](std::vector<int>& idx) {
        idx.clear();
        for (int g = 0; g < static_cast<int>(pending.size()); ++g)
            if (!pending[g].pixels.empty()) idx.push_back(g);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            if (pending[a].pixels.size() != pending[b].pixels.size())
                return pending[a].pixels.size() > pending[b].pixels.size();
            return pending[a].pixels.front() < pending[b].pixels.front();
        });
    };

    std::vector<int> idx;
    while (true) {
        group_order(idx);
        if (idx.empty()) break;
        bool progress = false;
        for (int g : idx) {
            if (pending[g].pixels.empty()) continue;
            int best_root = -1;
            for (std::size_t p : pending[g].pixels) {
                const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
                const int nb[4][2] = {{px - 1, py}, {px + 1, py}, {px, py - 1}, {px, py + 1}};
                for (auto& [qx, qy] : nb) {
                    if (qx < 0 || qx >= w || qy < 0 || qy >= h) continue;
                    const int root = settled_into[comp[static_cast<std::size_t>(qy) * w + qx]];
                    if (root < 0) continue;
                    if (best_root < 0 || region_size[root] > region_size[best_root] ||
                        (region_size[root] == region_size[best_root] &&
                         comp_label[root] < comp_label[best_root])) {
                        best_root = root;
                    }
                }
            }
            if (best_root < 0) continue;
            const int lab = comp_label[best_root];
            for (std::size_t p : pending[g].pixels) {
                labels.data[p] = lab;
                settled_into[comp[p]] = best_root;
            }
            region_size[best_root] += pending[g].pixels.size();
            pending[g].pixels.clear();
            progress = true;
        }
        if (progress) continue;

        // every remaining group borders only pending pixels; union the largest
        // into one of its pending neighbors so the loop can progress
        const int g = idx.front();
        int other = -1;
        for (std::size_t p : pending[g].pixels) {
            const int px = static_cast<int>(p % w), py = static_cast<int>(p / w);
            const int nb[4][2] = {{px - 1, py}, {px + 1, py}, {px, py - 1}, {px, py + 1}};
            for (auto& [qx, qy] : nb) {
                if (qx < 0 || qx >= w || qy < 0 || qy >= h) continue;
                const int gq = group_of[comp[static_cast<std::size_t>(qy) * w + qx]];
                if (gq >= 0 && gq != g && !pending[gq].pixels.empty()) {
                    other = gq;
                    break;
                }
            }
            if (other >= 0) break;
        }
        if (other < 0) {
            // pending group covers the whole image; settle it in place
            const int c0 = comp[pending[g].pixels.front()];
            settled_into[c0] = c0;
            region_size[c0] = pending[g].pixels.size();
            pending[g].pixels.clear();
            continue;
        }
        auto& dst = pending[other].pixels;
        for (std::size_t p : pending[g].pixels) {
            group_of[comp[p]] = other;
            dst.push_back(p);
        }
        pending[g].pixels.clear();
    }

    // compact labels to 0..count-1
    std::vector<int> remap(max_label + 1, -1);
    int next = 0;
    for (std::size_t p = 0; p < n; ++p) {
        int& lab = labels.data[p];
        if (remap[lab] < 0) remap[lab] = next++;
        lab = remap[lab];
    }
    count = next;
}

}  // namespace detail

// SLIC superpixels: localized k-means over (L, a, b, x*m/S, y*m/S) with grid
// seeding at spacing S = sqrt(H*W/n). The returned count can differ from the
// request after empty-cluster removal and connectivity enforcement.
inline SuperpixelMap slic(const ImageF64& lab, int n_superpixels, double compactness,
                          int max_iters = 10) {
    if (lab.channels != 3) throw std::invalid_argument("slic: expected Lab image");
    if (n_superpixels < 1) throw std::invalid_argument("slic: n_superpixels must be >= 1");
    if (compactness <= 0.0) throw std::invalid_argument("slic: compactness must be positive");
    const int w = lab.width, h = lab.height;
    const std::size_t n_px = static_cast<std::size_t>(w) * h;
    if (static_cast<std::size_t>(n_superpixels) > n_px)
        throw std::invalid_argument("slic: more superpixels than pixels");

    const double spacing = std::sqrt(static_cast<double>(n_px) / n_superpixels);
    const int nx = std::max(1, static_cast<int>(std::lround(w / spacing)));
    const int ny = std::max(1, static_cast<int>(std::lround(h / spacing)));
    const double sx = static_cast<double>(w) / nx;
    const double sy = static_cast<double>(h) / ny;

    std::vector<detail::SlicCenter> centers;
    centers.reserve(static_cast<std::size_t>(nx) * ny);
    for (int gy = 0; gy < ny; ++gy) {
        for (int gx = 0; gx < nx; ++gx) {
            detail::SlicCenter c;
            c.x = (gx + 0.5) * sx - 0.5;
            c.y = (gy + 0.5) * sy - 0.5;
            const int ix = detail::clampi(static_cast<int>(std::lround(c.x)), 0, w - 1);
            const int iy = detail::clampi(static_cast<int>(std::lround(c.y)), 0, h - 1);
            c.l = lab.at(ix, iy, 0);
            c.a = lab.at(ix, iy, 1);
            c.b = lab.at(ix, iy, 2);
            centers.push_back(c);
        }
    }

    const double spatial_w = compactness / spacing;  // scales (x, y) into color units
    ImageI32 labels(w, h, 1, -1);
    std::vector<double> best_d(n_px);

    for (int iter = 0; iter < max_iters; ++iter) {
        std::fill(best_d.begin(), best_d.end(), std::numeric_limits<double>::infinity());
        for (std::size_t ci = 0; ci < centers.size(); ++ci) {
            const auto& c = centers[ci];
            const int x0 = std::max(0, static_cast<int>(std::floor(c.x - 2 * spacing)));
            const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.x + 2 * spacing)));
            const int y0 = std::max(0, static_cast<int>(std::floor(c.y - 2 * spacing)));
            const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.y + 2 * spacing)));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const std::size_t p = static_cast<std::size_t>(y) * w + x;
                    const double dl = lab.data[p * 3 + 0] - c.l;
                    const double da = lab.data[p * 3 + 1] - c.a;
                    const double db = lab.data[p * 3 + 2] - c.b;
                    const double dx = (x - c.x) * spatial_w;
                    const double dy = (y - c.y) * spatial_w;
                    const double d = dl * dl + da * da + db * db + dx * dx + dy * dy;
                    if (d < best_d[p]) {
                        best_d[p] = d;
                        labels.data[p] = static_cast<int>(ci);
                    }
                }
            }
        }
        // guard: windows may miss pixels when the requested count is tiny
        for (std::size_t p = 0; p < n_px; ++p) {
            if (labels.data[p] >= 0) continue;
            const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t ci = 0; ci < centers.size(); ++ci) {
                const double dx = x - centers[ci].x, dy = y - centers[ci].y;
                const double d = dx * dx + dy * dy;
                if (d < bd) {
                    bd = d;
                    labels.data[p] = static_cast<int>(ci);
                }
            }
        }

        std::vector<detail::SlicCenter> acc(centers.size());
        std::vector<std::size_t> cnt(centers.size(), 0);
        for (std::size_t p = 0; p < n_px; ++p) {
            const int ci = labels.data[p];
            auto& a = acc[ci];
            a.l += lab.data[p * 3 + 0];
            a.a += lab.data[p * 3 + 1];
            a.b += lab.data[p * 3 + 2];
            a.x += static_cast<double>(p % w);
            a.y += static_cast<double>(p / w);
            ++cnt[ci];
        }
        for (std::size_t ci = 0; ci < centers.size(); ++ci) {
            if (cnt[ci] == 0) continue;
            const double k = 1.0 / static_cast<double>(cnt[ci]);
            centers[ci] = {acc[ci].l * k, acc[ci].a * k, acc[ci].b * k,
                           acc[ci].x * k, acc[ci].y * k};
        }
    }

    SuperpixelMap out;
    out.labels = std::move(labels);
    out.compactness = compactness;
    detail::enforce_connectivity(out.labels, out.count);
    return out;
}

}  // namespace weedmap
