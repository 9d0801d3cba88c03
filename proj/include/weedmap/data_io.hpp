#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "weedmap/features.hpp"
#include "weedmap/image.hpp"
#include "weedmap/imgproc.hpp"
#include "weedmap/io.hpp"
#include "weedmap/rng.hpp"

namespace weedmap::dataio {

using features::Split;

// Annotation color -> class. Keys are packed 0xRRGGBB.
struct ColorMap {
    std::map<std::uint32_t, PixelClass> entries;

    static std::uint32_t pack(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        return (std::uint32_t(r) << 16) | (std::uint32_t(g) << 8) | b;
    }

    void add_hex(const std::string& hex, PixelClass cls) {
        std::string h = hex;
        if (!h.empty() && h[0] == '#') h = h.substr(1);
        if (h.size() != 6) throw std::invalid_argument("color_map: bad hex color " + hex);
        entries[static_cast<std::uint32_t>(std::stoul(h, nullptr, 16))] = cls;
    }

    PixelClass decode(std::uint8_t r, std::uint8_t g, std::uint8_t b) const {
        auto it = entries.find(pack(r, g, b));
        if (it == entries.end()) {
            char buf[8];
            std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
            throw std::invalid_argument(std::string("annotation color not in color_map: ") + buf);
        }
        return it->second;
    }

    // the standard map for generated datasets: black soil, green crop, red weed
    static ColorMap standard() {
        ColorMap cm;
        cm.add_hex("#000000", PixelClass::soil);
        cm.add_hex("#00ff00", PixelClass::crop);
        cm.add_hex("#ff0000", PixelClass::weed);
        return cm;
    }
};

struct AnnotatedSample {
    FieldImage image;
    ImageU8 annotation;  // H x W of PixelClass values
    Split split = Split::train;
    std::optional<std::string> augmented_from;

    std::string source_id() const { return image.source_id; }
};

struct DatasetManifest {
    std::vector<AnnotatedSample> samples;
    ColorMap color_map;
    double train_ratio = 2.0 / 3.0;
    std::uint64_t seed = 0;
};

inline ImageU8 decode_annotation(const ImageU8& raster, const ColorMap& cm) {
    if (raster.channels != 3)
        throw std::invalid_argument("annotation raster must be 3-channel");
    ImageU8 out(raster.width, raster.height, 1);
    for (std::size_t p = 0; p < raster.pixel_count(); ++p)
        out.data[p] = static_cast<std::uint8_t>(
            cm.decode(raster.data[p * 3], raster.data[p * 3 + 1], raster.data[p * 3 + 2]));
    return out;
}

// Dataset layout: root/images/*.png (or .bmp) with root/annotations/*.png
// sharing stems, plus an optional root/split.txt of "<stem> train|test".
inline DatasetManifest load_dataset(const std::string& root, const ColorMap& cm) {
    namespace fs = std::filesystem;
    DatasetManifest manifest;
    manifest.color_map = cm;

    const fs::path images_dir = fs::path(root) / "images";
    const fs::path ann_dir = fs::path(root) / "annotations";
    if (!fs::is_directory(images_dir)) {
        std::fprintf(stderr, "warning: %s has no images/ directory; empty manifest\n",
                     root.c_str());
        return manifest;
    }

    std::map<std::string, Split> split_override;
    if (fs::exists(fs::path(root) / "split.txt")) {
        std::istringstream in(io::read_text((fs::path(root) / "split.txt").string()));
        std::string stem, which;
        while (in >> stem >> which) {
            if (which != "train" && which != "test")
                throw std::invalid_argument("split.txt: expected train|test for " + stem);
            split_override[stem] = which == "train" ? Split::train : Split::test;
        }
    }

    std::vector<fs::path> image_files;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".png" || ext == ".bmp") image_files.push_back(entry.path());
    }
    std::sort(image_files.begin(), image_files.end());
    if (image_files.empty())
        std::fprintf(stderr, "warning: no images found under %s\n", images_dir.c_str());

    for (const auto& img_path : image_files) {
        const std::string stem = img_path.stem().string();
        fs::path ann_path = ann_dir / (stem + ".png");
        if (!fs::exists(ann_path)) ann_path = ann_dir / (stem + ".bmp");
        if (!fs::exists(ann_path))
            throw std::invalid_argument("missing annotation for image " + stem);
        AnnotatedSample s;
        s.image.pixels = io::read_image(img_path.string());
        s.image.source_id = stem;
        ImageU8 ann_raster = io::read_image(ann_path.string());
        if (ann_raster.width != s.image.pixels.width ||
            ann_raster.height != s.image.pixels.height)
            throw std::invalid_argument("annotation size differs from image for " + stem);
        s.annotation = decode_annotation(ann_raster, cm);
        if (auto it = split_override.find(stem); it != split_override.end())
            s.split = it->second;
        manifest.samples.push_back(std::move(s));
    }
    return manifest;
}

// Seeded random split by ratio; samples listed in split.txt keep their
// assignment only if assign_all is false.
inline void assign_splits(DatasetManifest& manifest, double train_ratio, std::uint64_t seed) {
    if (train_ratio < 0.0 || train_ratio > 1.0)
        throw std::invalid_argument("train_ratio must be in [0,1]");
    manifest.train_ratio = train_ratio;
    manifest.seed = seed;
    std::vector<int> order(manifest.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng(seed);
    shuffle(order, rng);
    const auto n_train =
        static_cast<std::size_t>(std::lround(train_ratio * static_cast<double>(order.size())));
    for (std::size_t pos = 0; pos < order.size(); ++pos)
        manifest.samples[order[pos]].split = pos < n_train ? Split::train : Split::test;
}

// Geometric augmentation ops; each produces one augmented sample.
struct HFlip {};
struct VFlip {};
struct Rotate {
    double degrees;
};
struct Zoom {
    double scale;
};
struct Skew {
    double k;
};
using AugmentOp = std::variant<HFlip, VFlip, Rotate, Zoom, Skew>;

inline const char* op_name(const AugmentOp& op) {
    if (std::holds_alternative<HFlip>(op)) return "hflip";
    if (std::holds_alternative<VFlip>(op)) return "vflip";
    if (std::holds_alternative<Rotate>(op)) return "rotate";
    if (std::holds_alternative<Zoom>(op)) return "zoom";
    return "skew";
}

// The same geometric transform is applied to both rasters: bicubic for the
// image, nearest-neighbor for the annotation.
inline AnnotatedSample apply_augment(const AnnotatedSample& sample, const AugmentOp& op,
                                     int index) {
    AnnotatedSample out;
    out.split = sample.split;  // augmented samples never cross splits
    out.augmented_from = sample.source_id();
    out.image.source_id =
        sample.source_id() + "-aug" + std::to_string(index) + "-" + op_name(op);
    out.image.resized = sample.image.resized;

    if (std::holds_alternative<HFlip>(op)) {
        out.image.pixels = flip_horizontal(sample.image.pixels);
        out.annotation = flip_horizontal(sample.annotation);
    } else if (std::holds_alternative<VFlip>(op)) {
        out.image.pixels = flip_vertical(sample.image.pixels);
        out.annotation = flip_vertical(sample.annotation);
    } else {
        std::array<double, 4> inv{};
        if (const auto* r = std::get_if<Rotate>(&op)) {
            inv = rotation_inverse(r->degrees);
        } else if (const auto* z = std::get_if<Zoom>(&op)) {
            inv = zoom_inverse(z->scale);
        } else {
            inv = skew_inverse(std::get<Skew>(op).k);
        }
        out.image.pixels = warp_affine(sample.image.pixels, inv, Interp::bicubic);
        out.annotation = warp_affine(sample.annotation, inv, Interp::nearest);
    }
    return out;
}

inline std::vector<AnnotatedSample> augment(const AnnotatedSample& sample,
                                            const std::vector<AugmentOp>& ops,
                                            std::uint64_t /*seed*/ = 0) {
    if (ops.empty()) throw std::invalid_argument("augment: ops must be nonempty");
    std::vector<AnnotatedSample> out;
    out.reserve(ops.size());
    for (std::size_t i = 0; i < ops.size(); ++i)
        out.push_back(apply_augment(sample, ops[i], static_cast<int>(i)));
    return out;
}

inline AugmentOp random_op(Rng& rng) {
    switch (rng.below(5)) {
        case 0: return HFlip{};
        case 1: return VFlip{};
        case 2: return Rotate{rng.uniform(-30.0, 30.0)};
        case 3: return Zoom{rng.uniform(0.8, 1.25)};
        default: return Skew{rng.uniform(-0.25, 0.25)};
    }
}

// Default augmentation policy: one random augmentation for a seeded half of
// the originals, growing N originals into 1.5 N samples.
inline void augment_dataset(DatasetManifest& manifest, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<int> order(manifest.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    shuffle(order, rng);
    const std::size_t n_aug = manifest.samples.size() / 2;
    std::vector<AnnotatedSample> extra;
    for (std::size_t i = 0; i < n_aug; ++i) {
        const AugmentOp op = random_op(rng);
        extra.push_back(apply_augment(manifest.samples[order[i]], op, 0));
    }
    for (auto& s : extra) manifest.samples.push_back(std::move(s));
}

// Tile ground truth from pixel annotations: sub-threshold vegetation is
// background; otherwise the majority of crop vs weed pixels, ties to weed.
inline std::vector<std::tuple<int, int, TileLabel>> derive_tile_labels(
    const AnnotatedSample& sample, int side, double veg_threshold) {
    const ImageU8& ann = sample.annotation;
    if (side <= 0 || ann.width % side != 0 || ann.height % side != 0)
        throw std::invalid_argument("derive_tile_labels: side must divide annotation dims");
    const int rows = ann.height / side, cols = ann.width / side;
    std::vector<std::tuple<int, int, TileLabel>> out;
    out.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            std::int64_t crop = 0, weed = 0;
            for (int y = 0; y < side; ++y)
                for (int x = 0; x < side; ++x) {
                    const auto v = ann.at(c * side + x, r * side + y);
                    crop += v == static_cast<std::uint8_t>(PixelClass::crop);
                    weed += v == static_cast<std::uint8_t>(PixelClass::weed);
                }
            const double veg_fraction =
                static_cast<double>(crop + weed) / (static_cast<double>(side) * side);
            TileLabel label;
            if (veg_fraction < veg_threshold) {
                label = TileLabel::background;
            } else if (crop > weed) {
                label = TileLabel::crop;
            } else {
                label = TileLabel::weed;  // ties go to weed
            }
            out.emplace_back(r, c, label);
        }
    }
    return out;
}

// Resize a sample to the working resolution: bicubic image, nearest labels.
inline AnnotatedSample preprocess_sample(const AnnotatedSample& sample, int target_side) {
    AnnotatedSample out;
    out.split = sample.split;
    out.augmented_from = sample.augmented_from;
    out.image.source_id = sample.source_id();
    out.image.resized = sample.image.pixels.width != target_side ||
                        sample.image.pixels.height != target_side;
    out.image.pixels = out.image.resized
                           ? resize_bicubic(sample.image.pixels, target_side, target_side)
                           : sample.image.pixels;
    out.annotation = resize_nearest(sample.annotation, target_side, target_side);
    return out;
}

}  // namespace weedmap::dataio
