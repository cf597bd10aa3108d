#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spectag/errors.hpp"
#include "spectag/grid.hpp"

namespace spectag {

// Multi-channel image stack with per-channel wavelength metadata. Holds raw
// counts scaled to [0,1] or reflectance, depending on pipeline stage.
struct ChannelStack {
    int width = 0;
    int height = 0;
    std::vector<double> wavelengths; // center wavelength per channel, nm
    std::vector<double> fwhm;        // full width at half maximum per channel, nm
    std::vector<Grid> channels;

    int channel_count() const { return static_cast<int>(channels.size()); }

    void validate(const std::string& what = "ChannelStack") const {
        if (channels.empty()) throw DataError(what + ": no channels");
        if (wavelengths.size() != channels.size() || fwhm.size() != channels.size())
            throw DataError(what + ": wavelength/fwhm metadata does not match channel count");
        for (const Grid& g : channels)
            if (g.width != width || g.height != height)
                throw DataError(what + ": channel dimensions differ from stack dimensions");
    }

    bool same_geometry(const ChannelStack& other) const {
        return width == other.width && height == other.height &&
               wavelengths == other.wavelengths;
    }

    // Index of the channel centered at the given wavelength (0.5 nm slack).
    int band_index(double wavelength_nm) const {
        for (size_t i = 0; i < wavelengths.size(); ++i)
            if (std::abs(wavelengths[i] - wavelength_nm) < 0.5) return static_cast<int>(i);
        throw DataError("no channel at " + std::to_string(wavelength_nm) + " nm");
    }
};

// Dark / white reference pair for reflectance normalization.
struct CalibrationPair {
    ChannelStack dark;
    ChannelStack white;

    void validate() const {
        dark.validate("CalibrationPair.dark");
        white.validate("CalibrationPair.white");
        if (!dark.same_geometry(white))
            throw DataError("CalibrationPair: dark and white geometry differs");
    }
};

constexpr int kUnlabeled = -1;

// Per-pixel class annotation; kUnlabeled marks pixels outside every class.
struct GroundTruth {
    int width = 0;
    int height = 0;
    std::vector<int16_t> labels;

    GroundTruth() = default;
    GroundTruth(int w, int h)
        : width(w), height(h), labels(static_cast<size_t>(w) * h, kUnlabeled) {}

    int at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
    void set(int x, int y, int cls) {
        labels[static_cast<size_t>(y) * width + x] = static_cast<int16_t>(cls);
    }
};

constexpr double kCalibrationEpsilon = 1e-6;

// Per pixel and channel: Sr = (I - D) / (W - D), clamped to [0,1].
inline ChannelStack normalize_reflectance(const ChannelStack& raw, const CalibrationPair& calib) {
    raw.validate("normalize_reflectance: raw");
    calib.validate();
    if (!raw.same_geometry(calib.dark))
        throw DataError("normalize_reflectance: raw and calibration geometry differs");

    ChannelStack out;
    out.width = raw.width;
    out.height = raw.height;
    out.wavelengths = raw.wavelengths;
    out.fwhm = raw.fwhm;
    out.channels.reserve(raw.channels.size());
    for (int c = 0; c < raw.channel_count(); ++c) {
        const Grid& img = raw.channels[c];
        const Grid& dark = calib.dark.channels[c];
        const Grid& white = calib.white.channels[c];
        Grid sr(raw.width, raw.height);
        for (size_t i = 0; i < img.size(); ++i) {
            const double denom = white.values[i] - dark.values[i];
            if (denom < kCalibrationEpsilon) {
                const int x = static_cast<int>(i) % raw.width;
                const int y = static_cast<int>(i) / raw.width;
                throw CalibrationError(
                    "normalize_reflectance: white minus dark below epsilon at pixel (" +
                    std::to_string(x) + "," + std::to_string(y) + ") in channel " +
                    std::to_string(c) + " (" + std::to_string(raw.wavelengths[c]) + " nm)");
            }
            const double v = (img.values[i] - dark.values[i]) / denom;
            sr.values[i] = std::clamp(v, 0.0, 1.0);
        }
        out.channels.push_back(std::move(sr));
    }
    return out;
}

// Perona-Malik diffusion with exponential conduction g(d) = exp(-(d/kappa)^2)
// and Neumann boundaries. Flux is accumulated per edge so the grid sum is
// conserved; masked pixels exchange no flux and pass through unchanged.
inline Grid anisotropic_diffusion(const Grid& input, int iterations, double kappa, double step,
                                  const PixelMask* mask = nullptr) {
    if (iterations < 0) throw ConfigError("anisotropic_diffusion: iterations must be >= 0");
    if (!(step > 0.0) || step > 0.25)
        throw ConfigError("anisotropic_diffusion: step must lie in (0, 0.25]");
    if (!(kappa > 0.0)) throw ConfigError("anisotropic_diffusion: kappa must be positive");
    if (!input.all_finite()) throw DataError("anisotropic_diffusion: non-finite input values");
    if (mask && !mask->matches(input.width, input.height))
        throw DataError("anisotropic_diffusion: mask dimensions differ");

    const int w = input.width;
    const int h = input.height;
    Grid cur = input;
    if (iterations == 0) return cur;
    std::vector<double> flux(cur.size());
    const double inv_kappa2 = 1.0 / (kappa * kappa);
    auto usable = [&](size_t idx) { return !mask || !mask->masked(idx); };

    for (int it = 0; it < iterations; ++it) {
        std::fill(flux.begin(), flux.end(), 0.0);
        for (int y = 0; y < h; ++y) {
            const size_t row = static_cast<size_t>(y) * w;
            for (int x = 0; x + 1 < w; ++x) {
                const size_t p = row + x;
                const size_t q = p + 1;
                if (!usable(p) || !usable(q)) continue;
                const double d = cur.values[q] - cur.values[p];
                const double f = std::exp(-d * d * inv_kappa2) * d;
                flux[p] += f;
                flux[q] -= f;
            }
        }
        for (int y = 0; y + 1 < h; ++y) {
            const size_t row = static_cast<size_t>(y) * w;
            for (int x = 0; x < w; ++x) {
                const size_t p = row + x;
                const size_t q = p + w;
                if (!usable(p) || !usable(q)) continue;
                const double d = cur.values[q] - cur.values[p];
                const double f = std::exp(-d * d * inv_kappa2) * d;
                flux[p] += f;
                flux[q] -= f;
            }
        }
        for (size_t i = 0; i < cur.size(); ++i) cur.values[i] += step * flux[i];
    }
    return cur;
}

// HSV value over the three selected channels; pixels with V strictly above
// the threshold are masked.
inline PixelMask mask_specular(const ChannelStack& stack, const std::array<int, 3>& rgb_indices,
                               double v_threshold) {
    stack.validate("mask_specular");
    if (stack.channel_count() < 3)
        throw DataError("mask_specular: stack must have at least 3 channels");
    if (!(v_threshold > 0.0) || v_threshold > 1.0)
        throw ConfigError("mask_specular: v_threshold must lie in (0, 1]");
    for (int idx : rgb_indices)
        if (idx < 0 || idx >= stack.channel_count())
            throw DataError("mask_specular: channel index " + std::to_string(idx) +
                            " out of range");

    PixelMask mask(stack.width, stack.height);
    const Grid& r = stack.channels[rgb_indices[0]];
    const Grid& g = stack.channels[rgb_indices[1]];
    const Grid& b = stack.channels[rgb_indices[2]];
    for (size_t i = 0; i < r.size(); ++i) {
        const double v = std::max(r.values[i], std::max(g.values[i], b.values[i]));
        mask.bits[i] = v > v_threshold ? 1 : 0;
    }
    return mask;
}

constexpr std::array<double, 3> kSimulatedRgbWavelengths = {700.0, 560.0, 470.0};

// Extracts the given channels as a new stack (shared default: 700/560/470 nm).
inline ChannelStack select_channels(const ChannelStack& stack, const std::vector<int>& indices) {
    stack.validate("select_channels");
    for (size_t a = 0; a < indices.size(); ++a) {
        if (indices[a] < 0 || indices[a] >= stack.channel_count())
            throw DataError("select_channels: channel index out of range");
        for (size_t b = a + 1; b < indices.size(); ++b)
            if (indices[a] == indices[b]) throw DataError("select_channels: duplicate index");
    }
    ChannelStack out;
    out.width = stack.width;
    out.height = stack.height;
    for (int idx : indices) {
        out.wavelengths.push_back(stack.wavelengths[idx]);
        out.fwhm.push_back(stack.fwhm[idx]);
        out.channels.push_back(stack.channels[idx]);
    }
    return out;
}

inline std::array<int, 3> rgb_band_indices(
    const ChannelStack& stack, const std::array<double, 3>& wavelengths = kSimulatedRgbWavelengths) {
    return {stack.band_index(wavelengths[0]), stack.band_index(wavelengths[1]),
            stack.band_index(wavelengths[2])};
}

inline ChannelStack simulate_rgb(const ChannelStack& stack, const std::array<int, 3>& band_indices) {
    return select_channels(stack, {band_indices[0], band_indices[1], band_indices[2]});
}

inline ChannelStack simulate_rgb(const ChannelStack& stack) {
    return simulate_rgb(stack, rgb_band_indices(stack));
}

} // namespace spectag
