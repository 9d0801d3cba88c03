#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "weedmap/image.hpp"
#include "weedmap/io.hpp"
#include "weedmap/rng.hpp"

namespace weedmap::synthfield {

struct Radius {
    double min = 0, max = 0;
};

struct Color {
    std::uint8_t r = 0, g = 0, b = 0;
};

inline double color_distance(Color a, Color b) {
    const double dr = double(a.r) - b.r, dg = double(a.g) - b.g, db = double(a.b) - b.b;
    return std::sqrt(dr * dr + dg * dg + db * db);
}

// Synthetic field description. Ground truth is exact by construction, so
// every pipeline stage can be tested at desk scale without real datasets.
struct FieldSpec {
    int size = 500;
    double row_spacing = 72;
    Radius crop_radius{16, 24};
    int n_weeds = 30;
    Radius weed_radius{8, 14};
    double soil_noise = 5.0;
    double illumination_gradient = 0.06;  // relative brightness swing across x
    double overlap_prob = 0.3;            // chance a weed may sit on a crop plant
    double desaturation = 0.0;            // 0 = full color, 1 = gray
    // vegetation hues sit near each other and far from soil, so soil vs
    // plants is the dominant color contrast (as in real top-down fields)
    Color crop_color{52, 128, 44};
    Color weed_color{96, 150, 48};
    Color soil_color{118, 92, 64};
    std::uint64_t seed = 0;
};

// CWFID-like: bright, well-separated vegetation against soil. Geometry
// scales with the field so vegetation stays near 15% of the image.
inline FieldSpec high_contrast_preset(int size = 500, std::uint64_t seed = 0) {
    FieldSpec s;
    s.size = size;
    s.seed = seed;
    s.row_spacing = size * 0.24;
    s.crop_radius = {size * 0.045, size * 0.065};
    s.weed_radius = {size * 0.030, size * 0.045};
    s.n_weeds = 10;
    return s;
}

// Sugar-beet-like: illumination falloff and washed-out colors.
inline FieldSpec low_contrast_preset(int size = 500, std::uint64_t seed = 0) {
    FieldSpec s = high_contrast_preset(size, seed);
    s.illumination_gradient = 0.22;
    s.desaturation = 0.30;
    s.soil_noise = 8.0;
    s.crop_color = {64, 110, 56};
    s.weed_color = {100, 132, 58};
    s.soil_color = {106, 90, 70};
    return s;
}

struct SynthField {
    FieldImage image;
    VegetationMask veg_mask;
    ImageU8 class_map;  // PixelClass values
};

namespace detail {

struct Blob {
    double cx, cy, rx, ry, lobe_amp, phase;
    int lobes;

    bool contains(double x, double y) const {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        const double rho = std::sqrt(dx * dx + dy * dy);
        if (rho > 1.35) return false;
        const double theta = std::atan2(dy, dx);
        return rho <= 1.0 + lobe_amp * std::sin(lobes * theta + phase);
    }
};

inline Blob make_blob(double cx, double cy, double r_lo, double r_hi, Rng& rng) {
    Blob b;
    b.cx = cx;
    b.cy = cy;
    b.rx = rng.uniform(r_lo, r_hi);
    b.ry = b.rx * rng.uniform(0.75, 1.25);
    b.lobe_amp = rng.uniform(0.12, 0.30);
    b.lobes = rng.range(4, 7);
    b.phase = rng.uniform(0.0, 6.283185307179586);
    return b;
}

inline void paint(const Blob& blob, PixelClass cls, Color color, double jitter, ImageU8& img,
                  ImageU8& class_map, Rng& rng) {
    const int x0 = std::max(0, static_cast<int>(std::floor(blob.cx - blob.rx * 1.4)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(blob.cx + blob.rx * 1.4)));
    const int y0 = std::max(0, static_cast<int>(std::floor(blob.cy - blob.ry * 1.4)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(blob.cy + blob.ry * 1.4)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            if (!blob.contains(x, y)) continue;
            const double j = rng.uniform(-jitter, jitter);
            auto shade = [&](std::uint8_t base) {
                return static_cast<std::uint8_t>(std::clamp(base * (1.0 + j), 0.0, 255.0));
            };
            img.at(x, y, 0) = shade(color.r);
            img.at(x, y, 1) = shade(color.g);
            img.at(x, y, 2) = shade(color.b);
            class_map.at(x, y) = static_cast<std::uint8_t>(cls);
        }
    }
}

}  // namespace detail

inline SynthField generate(const FieldSpec& spec) {
    if (spec.size < 16) throw std::invalid_argument("synthfield: size too small");
    if (spec.crop_radius.min <= 0 || spec.weed_radius.min <= 0 ||
        spec.crop_radius.max < spec.crop_radius.min ||
        spec.weed_radius.max < spec.weed_radius.min)
        throw std::invalid_argument("synthfield: radii must be positive and ordered");
    if (spec.crop_radius.max * 2 >= spec.size || spec.weed_radius.max * 2 >= spec.size)
        throw std::invalid_argument("synthfield: blobs cannot fit in the field");
    if (spec.row_spacing <= spec.crop_radius.max)
        throw std::invalid_argument("synthfield: rows tighter than crop plants");
    if (color_distance(spec.crop_color, spec.weed_color) < 30.0)
        throw std::invalid_argument("synthfield: crop and weed colors too close");
    if (spec.overlap_prob < 0.0 || spec.overlap_prob > 1.0)
        throw std::invalid_argument("synthfield: overlap_prob must be in [0,1]");

    const int n = spec.size;
    Rng rng(spec.seed);
    ImageU8 img(n, n, 3);
    ImageU8 class_map(n, n, 1, static_cast<std::uint8_t>(PixelClass::soil));

    // soil base
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            img.at(x, y, 0) = spec.soil_color.r;
            img.at(x, y, 1) = spec.soil_color.g;
            img.at(x, y, 2) = spec.soil_color.b;
        }

    // crop rows
    Rng crop_rng = rng.fork(1);
    const int n_rows = std::max(1, static_cast<int>(std::floor(n / spec.row_spacing)));
    for (int row = 0; row < n_rows; ++row) {
        const double cy = (row + 0.5) * spec.row_spacing +
                          crop_rng.uniform(-0.08, 0.08) * spec.row_spacing;
        const double step_base = spec.crop_radius.max * 3.6;
        double cx = crop_rng.uniform(0.4, 1.1) * step_base;
        while (cx < n - spec.crop_radius.min) {
            auto blob = detail::make_blob(cx, cy, spec.crop_radius.min, spec.crop_radius.max,
                                          crop_rng);
            detail::paint(blob, PixelClass::crop, spec.crop_color, 0.10, img, class_map,
                          crop_rng);
            cx += step_base * crop_rng.uniform(0.85, 1.35);
        }
    }

    Rng noise_rng = rng.fork(2);

    // weeds: each index gets its own forked stream, so a field with more
    // weeds is a strict superset of the same field with fewer
    for (int wi = 0; wi < spec.n_weeds; ++wi) {
        Rng weed_rng = rng.fork(1000 + static_cast<std::uint64_t>(wi));
        const bool may_overlap = weed_rng.uniform() < spec.overlap_prob;
        bool placed = false;
        for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
            const double wx = weed_rng.uniform(spec.weed_radius.max, n - spec.weed_radius.max);
            const double wy = weed_rng.uniform(spec.weed_radius.max, n - spec.weed_radius.max);
            if (!may_overlap) {
                const int cx = static_cast<int>(wx), cy = static_cast<int>(wy);
                if (class_map.at(std::clamp(cx, 0, n - 1), std::clamp(cy, 0, n - 1)) ==
                    static_cast<std::uint8_t>(PixelClass::crop))
                    continue;
            }
            auto blob = detail::make_blob(wx, wy, spec.weed_radius.min, spec.weed_radius.max,
                                          weed_rng);
            detail::paint(blob, PixelClass::weed, spec.weed_color, 0.12, img, class_map,
                          weed_rng);
            placed = true;
        }
        if (!placed)
            throw std::invalid_argument("synthfield: could not place weed " +
                                        std::to_string(wi) + " without overlap");
    }

    // photometric effects: soil texture noise, illumination gradient,
    // optional desaturation. Colors only; the class map stays exact.
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double gain = 1.0 - spec.illumination_gradient / 2.0 +
                                spec.illumination_gradient * x / std::max(1, n - 1);
            const double orig[3] = {double(img.at(x, y, 0)), double(img.at(x, y, 1)),
                                    double(img.at(x, y, 2))};
            const double gray = 0.299 * orig[0] + 0.587 * orig[1] + 0.114 * orig[2];
            for (int c = 0; c < 3; ++c) {
                double v = orig[c] + noise_rng.gaussian() * spec.soil_noise;
                v = v * (1.0 - spec.desaturation) + gray * spec.desaturation;
                v *= gain;
                img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    }

    SynthField out;
    out.image.pixels = std::move(img);
    out.image.source_id = "synth-" + std::to_string(spec.seed);
    out.image.resized = false;

    ImageU8 mask(n, n, 1);
    for (std::size_t p = 0; p < mask.data.size(); ++p)
        mask.data[p] = class_map.data[p] != static_cast<std::uint8_t>(PixelClass::soil) ? 1 : 0;
    out.veg_mask = make_vegetation_mask(std::move(mask));
    out.class_map = std::move(class_map);
    return out;
}

// Annotation colors for the on-disk dataset layout.
inline Color annotation_color(PixelClass c) {
    switch (c) {
        case PixelClass::soil: return {0, 0, 0};
        case PixelClass::crop: return {0, 255, 0};
        case PixelClass::weed: return {255, 0, 0};
    }
    return {0, 0, 0};
}

inline ImageU8 class_map_to_annotation(const ImageU8& class_map) {
    ImageU8 ann(class_map.width, class_map.height, 3);
    for (std::size_t p = 0; p < class_map.data.size(); ++p) {
        const Color c = annotation_color(static_cast<PixelClass>(class_map.data[p]));
        ann.data[p * 3 + 0] = c.r;
        ann.data[p * 3 + 1] = c.g;
        ann.data[p * 3 + 2] = c.b;
    }
    return ann;
}

// Writes fields in the on-disk layout the dataset loader consumes
// (images/ + annotations/ + split.txt), so synthetic sets are drop-in
// datasets. Returns the written stems.
inline std::vector<std::string> write_dataset(const std::string& root,
                                              const std::vector<SynthField>& fields,
                                              const std::vector<bool>* is_test = nullptr) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(root) / "images");
    fs::create_directories(fs::path(root) / "annotations");
    std::vector<std::string> stems;
    std::string split_txt;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "field%04zu", i);
        io::write_image((fs::path(root) / "images" / (std::string(stem) + ".png")).string(),
                        fields[i].image.pixels);
        io::write_image(
            (fs::path(root) / "annotations" / (std::string(stem) + ".png")).string(),
            class_map_to_annotation(fields[i].class_map));
        if (is_test)
            split_txt += std::string(stem) + ((*is_test)[i] ? " test\n" : " train\n");
        stems.emplace_back(stem);
    }
    if (is_test) io::write_text((fs::path(root) / "split.txt").string(), split_txt);
    return stems;
}

}  // namespace weedmap::synthfield
