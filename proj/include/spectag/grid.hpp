#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spectag/errors.hpp"

namespace spectag {

// Row-major H x W scalar grid. Values are raw counts scaled to [0,1] or
// reflectance, depending on context.
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    Grid() = default;
    Grid(int w, int h, double fill = 0.0)
        : width(w), height(h), values(static_cast<size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0) throw DataError("Grid dimensions must be positive");
    }

    size_t size() const { return values.size(); }
    double& at(int x, int y) { return values[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return values[static_cast<size_t>(y) * width + x]; }
    bool same_shape(const Grid& other) const {
        return width == other.width && height == other.height;
    }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double sum() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }

    double mean() const { return values.empty() ? 0.0 : sum() / static_cast<double>(values.size()); }

    double variance() const {
        if (values.empty()) return 0.0;
        const double m = mean();
        double s = 0.0;
        for (double v : values) s += (v - m) * (v - m);
        return s / static_cast<double>(values.size());
    }
};

// Bitmap of excluded pixels (specular highlights). 1 = masked.
struct PixelMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits;

    PixelMask() = default;
    PixelMask(int w, int h) : width(w), height(h), bits(static_cast<size_t>(w) * h, 0) {
        if (w <= 0 || h <= 0) throw DataError("PixelMask dimensions must be positive");
    }

    bool masked(int x, int y) const { return bits[static_cast<size_t>(y) * width + x] != 0; }
    bool masked(size_t idx) const { return bits[idx] != 0; }
    void set(int x, int y, bool on = true) {
        bits[static_cast<size_t>(y) * width + x] = on ? 1 : 0;
    }

    size_t count() const {
        size_t n = 0;
        for (uint8_t b : bits) n += b != 0;
        return n;
    }

    bool matches(int w, int h) const { return width == w && height == h; }
};

inline void require_same_shape(const Grid& a, const Grid& b, const std::string& what) {
    if (!a.same_shape(b))
        throw DataError(what + ": grid shapes differ (" + std::to_string(a.width) + "x" +
                        std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                        std::to_string(b.height) + ")");
}

} // namespace spectag
