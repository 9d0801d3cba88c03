#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <type_traits>

#include "weedmap/image.hpp"

namespace weedmap {

namespace detail {

// Cubic convolution kernel with a = -0.75 (the common bicubic choice).
inline double cubic_weight(double t) {
    constexpr double a = -0.75;
    t = std::fabs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace detail

// Bicubic resize with edge replication; output clamped to [0,255].
inline ImageU8 resize_bicubic(const ImageU8& src, int out_w, int out_h) {
    if (src.empty()) throw std::invalid_argument("resize: empty image");
    if (out_w <= 0 || out_h <= 0) throw std::invalid_argument("resize: bad target size");
    if (src.width == out_w && src.height == out_h) return src;

    ImageU8 dst(out_w, out_h, src.channels);
    const double sx = static_cast<double>(src.width) / out_w;
    const double sy = static_cast<double>(src.height) / out_h;

    for (int oy = 0; oy < out_h; ++oy) {
        const double fy = (oy + 0.5) * sy - 0.5;
        const int y0 = static_cast<int>(std::floor(fy));
        std::array<double, 4> wy;
        for (int k = 0; k < 4; ++k) wy[k] = detail::cubic_weight(fy - (y0 - 1 + k));
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = (ox + 0.5) * sx - 0.5;
            const int x0 = static_cast<int>(std::floor(fx));
            std::array<double, 4> wx;
            for (int k = 0; k < 4; ++k) wx[k] = detail::cubic_weight(fx - (x0 - 1 + k));
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int j = 0; j < 4; ++j) {
                    const int yy = detail::clampi(y0 - 1 + j, 0, src.height - 1);
                    double row = 0.0;
                    for (int i = 0; i < 4; ++i) {
                        const int xx = detail::clampi(x0 - 1 + i, 0, src.width - 1);
                        row += wx[i] * src.at(xx, yy, c);
                    }
                    acc += wy[j] * row;
                }
                acc = std::clamp(acc, 0.0, 255.0);
                dst.at(ox, oy, c) = static_cast<std::uint8_t>(std::lround(acc));
            }
        }
    }
    return dst;
}

// Nearest-neighbor resize; the right choice for label rasters where
// interpolation would invent fractional classes.
template <typename T>
Image<T> resize_nearest(const Image<T>& src, int out_w, int out_h) {
    if (src.empty()) throw std::invalid_argument("resize: empty image");
    if (out_w <= 0 || out_h <= 0) throw std::invalid_argument("resize: bad target size");
    if (src.width == out_w && src.height == out_h) return src;
    Image<T> dst(out_w, out_h, src.channels);
    const double sx = static_cast<double>(src.width) / out_w;
    const double sy = static_cast<double>(src.height) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        const int iy = detail::clampi(static_cast<int>((oy + 0.5) * sy), 0, src.height - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const int ix = detail::clampi(static_cast<int>((ox + 0.5) * sx), 0, src.width - 1);
            for (int c = 0; c < src.channels; ++c) dst.at(ox, oy, c) = src.at(ix, iy, c);
        }
    }
    return dst;
}

// sRGB (8-bit, D65) -> CIE L*a*b*. L in [0,100].
inline ImageF64 rgb_to_lab(const ImageU8& rgb) {
    if (rgb.channels != 3) throw std::invalid_argument("rgb_to_lab: expected 3 channels");
    ImageF64 lab(rgb.width, rgb.height, 3);

    auto linearize = [](double u) {
        u /= 255.0;
        return u <= 0.04045 ? u / 12.92 : std::pow((u + 0.055) / 1.055, 2.4);
    };
    constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
    constexpr double d = 6.0 / 29.0, d3 = d * d * d;
    auto f = [&](double t) {
        return t > d3 ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
    };

    const std::size_t n = rgb.pixel_count();
    for (std::size_t p = 0; p < n; ++p) {
        const double r = linearize(rgb.data[p * 3 + 0]);
        const double g = linearize(rgb.data[p * 3 + 1]);
        const double b = linearize(rgb.data[p * 3 + 2]);
        const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
        const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
        const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
        const double fx = f(x / xn), fy = f(y / yn), fz = f(z / zn);
        lab.data[p * 3 + 0] = 116.0 * fy - 16.0;
        lab.data[p * 3 + 1] = 500.0 * (fx - fy);
        lab.data[p * 3 + 2] = 200.0 * (fy - fz);
    }
    return lab;
}

template <typename T>
Image<T> flip_horizontal(const Image<T>& src) {
    Image<T> dst(src.width, src.height, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c)
                dst.at(x, y, c) = src.at(src.width - 1 - x, y, c);
    return dst;
}

template <typename T>
Image<T> flip_vertical(const Image<T>& src) {
    Image<T> dst(src.width, src.height, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c)
                dst.at(x, y, c) = src.at(x, src.height - 1 - y, c);
    return dst;
}

enum class Interp { nearest, bicubic };

// Inverse-mapped affine warp about the image center. The 2x2 matrix maps
// destination coordinates to source coordinates. Out-of-range samples
// replicate the border, which keeps annotations label-valued.
template <typename T>
Image<T> warp_affine(const Image<T>& src, const std::array<double, 4>& inv, Interp interp) {
    Image<T> dst(src.width, src.height, src.channels);
    const double cx = (src.width - 1) / 2.0;
    const double cy = (src.height - 1) / 2.0;
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < src.width; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double sxf = inv[0] * dx + inv[1] * dy + cx;
            const double syf = inv[2] * dx + inv[3] * dy + cy;
            if (interp == Interp::nearest) {
                const int xi = detail::clampi(static_cast<int>(std::lround(sxf)), 0, src.width - 1);
                const int yi = detail::clampi(static_cast<int>(std::lround(syf)), 0, src.height - 1);
                for (int c = 0; c < src.channels; ++c) dst.at(x, y, c) = src.at(xi, yi, c);
            } else {
                const int x0 = static_cast<int>(std::floor(sxf));
                const int y0 = static_cast<int>(std::floor(syf));
                std::array<double, 4> wx, wy;
                for (int k = 0; k < 4; ++k) {
                    wx[k] = detail::cubic_weight(sxf - (x0 - 1 + k));
                    wy[k] = detail::cubic_weight(syf - (y0 - 1 + k));
                }
                for (int c = 0; c < src.channels; ++c) {
                    double acc = 0.0;
                    for (int j = 0; j < 4; ++j) {
                        const int yy = detail::clampi(y0 - 1 + j, 0, src.height - 1);
                        double row = 0.0;
                        for (int i = 0; i < 4; ++i) {
                            const int xx = detail::clampi(x0 - 1 + i, 0, src.width - 1);
                            row += wx[i] * src.at(xx, yy, c);
                        }
                        acc += wy[j] * row;
                    }
                    if constexpr (std::is_same_v<T, std::uint8_t>) {
                        dst.at(x, y, c) =
                            static_cast<std::uint8_t>(std::lround(std::clamp(acc, 0.0, 255.0)));
                    } else {
                        dst.at(x, y, c) = static_cast<T>(acc);
                    }
                }
            }
        }
    }
    return dst;
}

inline std::array<double, 4> rotation_inverse(double degrees) {
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    // inverse of a rotation is its transpose
    return {c, s, -s, c};
}

inline std::array<double, 4> zoom_inverse(double scale) {
    if (scale <= 0.0) throw std::invalid_argument("zoom: scale must be positive");
    return {1.0 / scale, 0.0, 0.0, 1.0 / scale};
}

inline std::array<double, 4> skew_inverse(double k) {
    // forward shear x' = x + k*y; inverse x = x' - k*y'
    return {1.0, -k, 0.0, 1.0};
}

}  // namespace weedmap
