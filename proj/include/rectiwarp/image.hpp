#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rectiwarp {

// Dense raster with values in [0,1], 1 or 3 channels, row-major,
// channel-interleaved.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c = 1, double fill = 0.0)
        : width(w), height(h), channels(c) {
        if (w <= 0 || h <= 0 || (c != 1 && c != 3)) {
            throw std::invalid_argument("Image: dimensions must be positive and channels 1 or 3");
        }
        data.assign(static_cast<std::size_t>(w) * h * c, fill);
    }

    double &at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }
    bool same_shape(const Image &o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    void clamp01() {
        for (double &v : data) v = std::clamp(v, 0.0, 1.0);
    }
};

// Binary validity/prompt raster; values are exactly 0 or 1.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
        if (w <= 0 || h <= 0) {
            throw std::invalid_argument("Mask: dimensions must be positive");
        }
        data.assign(static_cast<std::size_t>(w) * h, fill ? 1 : 0);
    }

    static Mask all_one(int w, int h) { return Mask(w, h, 1); }

    std::uint8_t &at(int x, int y) {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    std::uint8_t at(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }

    std::size_t count_ones() const {
        std::size_t n = 0;
        for (std::uint8_t v : data) n += v;
        return n;
    }
    bool all_ones() const { return count_ones() == data.size(); }
    bool all_zeros() const { return count_ones() == 0; }
};

// Align-corners mapping between pixel indices and the normalized square
// [-1,1]^2: index 0 maps to -1 and index n-1 to +1. A single-pixel axis
// maps to 0.
inline double pixel_to_norm(double index, int n) {
    if (n <= 1) return 0.0;
    return 2.0 * index / (n - 1) - 1.0;
}
inline double norm_to_pixel(double coord, int n) {
    if (n <= 1) return 0.0;
    return (coord + 1.0) * 0.5 * (n - 1);
}

} // namespace rectiwarp
