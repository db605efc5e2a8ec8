#pragma once

#include <cstddef>
#include <vector>

#include "sa2d/errors.hpp"

namespace sa2d {

// Single-channel image, row-major, values expected in [0,1].
struct Image {
    int h = 0;
    int w = 0;
    std::vector<double> px;

    Image() = default;
    Image(int height, int width, double fill = 0.0)
        : h(height), w(width), px(static_cast<std::size_t>(height) * width, fill) {}

    double& at(int i, int j) { return px[static_cast<std::size_t>(i) * w + j]; }
    double at(int i, int j) const { return px[static_cast<std::size_t>(i) * w + j]; }

    std::size_t size() const { return px.size(); }

    bool same_shape(const Image& other) const { return h == other.h && w == other.w; }
};

inline void require_same_shape(const Image& a, const Image& b, const char* where) {
    if (!a.same_shape(b)) throw Error(ErrorKind::ShapeMismatch, where);
}

inline double mean_pixel(const Image& img) {
    double s = 0.0;
    for (double v : img.px) s += v;
    return img.px.empty() ? 0.0 : s / static_cast<double>(img.px.size());
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// round-half-up quantization to 8 bits
inline unsigned char quantize8(double v) {
    double q = clamp01(v) * 255.0 + 0.5;
    int b = static_cast<int>(q);
    return static_cast<unsigned char>(b > 255 ? 255 : b);
}

inline double dequantize8(unsigned char b) { return static_cast<double>(b) / 255.0; }

}  // namespace sa2d
