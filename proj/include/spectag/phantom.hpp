#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "spectag/errors.hpp"
#include "spectag/image.hpp"
#include "spectag/seeding.hpp"

namespace spectag {

struct PhantomClassSpec {
    std::string name;
    std::vector<double> spectrum;  // reflectance per band, [0,1]
    double texture_amplitude = 0.0;
    double texture_scale = 8.0;    // correlation length in pixels
};

// Description of one synthetic labeled image. Regions are a Voronoi layout
// over randomly placed sites, or explicit vertical stripes when
// stripe_classes is set (used for controlled tests).
struct PhantomSpec {
    int width = 512;
    int height = 512;
    std::vector<double> wavelengths = {470, 480, 511, 560, 580, 600, 660, 700};
    std::vector<double> fwhm = {20, 25, 20, 20, 20, 20, 20, 20};
    std::vector<PhantomClassSpec> classes;
    double noise_sigma = 0.01;
    int specular_discs = 0;
    double specular_radius = 10.0;
    double dark_level = 0.05;
    double white_level = 0.95;
    int sites_min = 2;
    int sites_max = 4;
    std::vector<int> stripe_classes;      // class id per stripe, left to right
    std::vector<double> stripe_bounds;    // interior boundaries as fractions of width
    uint64_t seed = 0;

    void validate() const {
        if (classes.size() < 2) throw DataError("PhantomSpec: at least 2 classes required");
        if (width <= 0 || height <= 0) throw DataError("PhantomSpec: dimensions must be positive");
        if (wavelengths.size() != fwhm.size())
            throw DataError("PhantomSpec: wavelengths/fwhm length mismatch");
        for (const auto& c : classes) {
            if (c.spectrum.size() != wavelengths.size())
                throw DataError("PhantomSpec: inconsistent spectra lengths for class " + c.name);
            for (double s : c.spectrum)
                if (!(s >= 0.0) || s > 1.0)
                    throw DataError("PhantomSpec: spectrum values must lie in [0,1]");
        }
        if (!(white_level > dark_level))
            throw DataError("PhantomSpec: white_level must exceed dark_level");
        if (!stripe_classes.empty()) {
            if (stripe_bounds.size() + 1 != stripe_classes.size())
                throw DataError("PhantomSpec: stripe_bounds must have one entry less than stripe_classes");
            for (int c : stripe_classes)
                if (c < 0 || c >= static_cast<int>(classes.size()))
                    throw DataError("PhantomSpec: stripe class id out of range");
        } else if (sites_min < 1 || sites_max < sites_min) {
            throw DataError("PhantomSpec: invalid site count range");
        }
    }
};

struct PhantomImage {
    ChannelStack raw;
    CalibrationPair calibration;
    GroundTruth truth;
};

namespace detail {

// Band-limited value noise: unit Gaussians on a lattice of the given pitch,
// bilinearly interpolated. Mean ~0, scale ~1, correlation length ~pitch.
inline std::vector<double> value_noise(int width, int height, double pitch, uint64_t seed) {
    pitch = std::max(1.0, pitch);
    const int nx = static_cast<int>(std::ceil(width / pitch)) + 2;
    const int ny = static_cast<int>(std::ceil(height / pitch)) + 2;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> lattice(static_cast<size_t>(nx) * ny);
    for (double& v : lattice) v = gauss(rng);

    std::vector<double> field(static_cast<size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
        const double gy = y / pitch;
        const int iy = static_cast<int>(gy);
        const double fy = gy - iy;
        for (int x = 0; x < width; ++x) {
            const double gx = x / pitch;
            const int ix = static_cast<int>(gx);
            const double fx = gx - ix;
            const double v00 = lattice[static_cast<size_t>(iy) * nx + ix];
            const double v10 = lattice[static_cast<size_t>(iy) * nx + ix + 1];
            const double v01 = lattice[static_cast<size_t>(iy + 1) * nx + ix];
            const double v11 = lattice[static_cast<size_t>(iy + 1) * nx + ix + 1];
            const double top = v00 + fx * (v10 - v00);
            const double bot = v01 + fx * (v11 - v01);
            field[static_cast<size_t>(y) * width + x] = top + fy * (bot - top);
        }
    }
    return field;
}

} // namespace detail

// Deterministic labeled phantom: per-class mean spectrum modulated by a
// class-specific band-limited texture, additive Gaussian noise, optional
// saturated discs, flat dark/white references.
inline PhantomImage generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    const int w = spec.width;
    const int h = spec.height;
    const int nc = static_cast<int>(spec.wavelengths.size());
    const int nclasses = static_cast<int>(spec.classes.size());
    std::mt19937_64 rng(mix_seed(spec.seed, 0x7061696e));

    // Region map.
    GroundTruth truth(w, h);
    if (!spec.stripe_classes.empty()) {
        std::vector<int> bound_px;
        for (double f : spec.stripe_bounds)
            bound_px.push_back(static_cast<int>(std::lround(std::clamp(f, 0.0, 1.0) * w)));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                size_t s = 0;
                while (s < bound_px.size() && x >= bound_px[s]) ++s;
                truth.set(x, y, spec.stripe_classes[s]);
            }
    } else {
        std::uniform_int_distribution<int> site_count(spec.sites_min, spec.sites_max);
        const int n_sites = site_count(rng);
        // Shuffled class order so small site counts still cycle through all
        // classes across differently seeded images.
        std::vector<int> order(nclasses);
        for (int i = 0; i < nclasses; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        std::uniform_real_distribution<double> ux(0.0, 1.0);
        struct Site {
            double x, y;
            int cls;
        };
        std::vector<Site> sites;
        const double min_dist2 = 0.04 * (static_cast<double>(w) * w + static_cast<double>(h) * h);
        for (int s = 0; s < n_sites; ++s) {
            double sx = 0, sy = 0;
            for (int attempt = 0; attempt < 32; ++attempt) {
                sx = ux(rng) * w;
                sy = ux(rng) * h;
                bool ok = true;
                for (const Site& other : sites) {
                    const double dx = sx - other.x, dy = sy - other.y;
                    if (dx * dx + dy * dy < min_dist2) ok = false;
                }
                if (ok) break;
            }
            sites.push_back({sx, sy, order[s % nclasses]});
        }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double best = 1e300;
                int cls = sites[0].cls;
                for (const Site& s : sites) {
                    const double dx = x - s.x, dy = y - s.y;
                    const double d = dx * dx + dy * dy;
                    if (d < best) {
                        best = d;
                        cls = s.cls;
                    }
                }
                truth.set(x, y, cls);
            }
    }

    // Per-class multiplicative texture fields.
    std::vector<std::vector<double>> texture(nclasses);
    for (int c = 0; c < nclasses; ++c) {
        const auto& cls = spec.classes[c];
        if (cls.texture_amplitude > 0.0)
            texture[c] = detail::value_noise(w, h, cls.texture_scale,
                                             mix_seed(spec.seed, 0x74657874 + c));
    }

    // True reflectance, then raw counts I = D + Sr * (W - D).
    ChannelStack raw;
    raw.width = w;
    raw.height = h;
    raw.wavelengths = spec.wavelengths;
    raw.fwhm = spec.fwhm;
    raw.channels.assign(nc, Grid(w, h));

    std::mt19937_64 noise_rng(mix_seed(spec.seed, 0x6e6f6973));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double span = spec.white_level - spec.dark_level;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int cls = truth.at(x, y);
            const auto& cspec = spec.classes[cls];
            double factor = 1.0;
            if (!texture[cls].empty())
                factor = std::max(
                    0.05, 1.0 + cspec.texture_amplitude * texture[cls][static_cast<size_t>(y) * w + x]);
            for (int c = 0; c < nc; ++c) {
                double sr = cspec.spectrum[c] * factor;
                if (spec.noise_sigma > 0.0) sr += spec.noise_sigma * gauss(noise_rng);
                sr = std::clamp(sr, 0.0, 1.0);
                raw.channels[c].at(x, y) = spec.dark_level + sr * span;
            }
        }
    }

    if (spec.specular_discs > 0) {
        std::mt19937_64 disc_rng(mix_seed(spec.seed, 0x64697363));
        std::uniform_real_distribution<double> ux(0.0, 1.0);
        for (int d = 0; d < spec.specular_discs; ++d) {
            const double cx = ux(disc_rng) * w;
            const double cy = ux(disc_rng) * h;
            const double r = spec.specular_radius * (0.6 + 0.8 * ux(disc_rng));
            const int x0 = std::max(0, static_cast<int>(cx - r) - 1);
            const int x1 = std::min(w - 1, static_cast<int>(cx + r) + 1);
            const int y0 = std::max(0, static_cast<int>(cy - r) - 1);
            const int y1 = std::min(h - 1, static_cast<int>(cy + r) + 1);
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double dx = x - cx, dy = y - cy;
                    if (dx * dx + dy * dy <= r * r)
                        for (int c = 0; c < nc; ++c) raw.channels[c].at(x, y) = 1.0;
                }
        }
    }

    PhantomImage out;
    out.raw = std::move(raw);
    out.truth = std::move(truth);
    ChannelStack dark, white;
    dark.width = white.width = w;
    dark.height = white.height = h;
    dark.wavelengths = white.wavelengths = spec.wavelengths;
    dark.fwhm = white.fwhm = spec.fwhm;
    dark.channels.assign(nc, Grid(w, h, spec.dark_level));
    white.channels.assign(nc, Grid(w, h, spec.white_level));
    out.calibration.dark = std::move(dark);
    out.calibration.white = std::move(white);
    return out;
}

// Six-tissue phantom mirroring the band layout of the acquisition protocol.
// Two classes (liver/spleen) share every band except 580/600 nm and share
// texture statistics, so they separate on the full stack but not on the
// simulated RGB subset.
inline std::vector<PhantomClassSpec> default_phantom_classes() {
    return {
        //                     470   480   511   560   580   600   660   700
        {"liver", {0.12, 0.13, 0.15, 0.18, 0.20, 0.24, 0.55, 0.62}, 0.10, 6.0},
        {"spleen", {0.12, 0.13, 0.15, 0.18, 0.33, 0.40, 0.55, 0.62}, 0.10, 6.0},
        {"gallbladder", {0.30, 0.34, 0.45, 0.50, 0.46, 0.40, 0.35, 0.30}, 0.06, 12.0},
        {"diaphragm", {0.55, 0.56, 0.58, 0.62, 0.63, 0.65, 0.70, 0.72}, 0.12, 3.0},
        {"intestine", {0.35, 0.36, 0.38, 0.45, 0.48, 0.52, 0.68, 0.70}, 0.15, 10.0},
        {"abdominal_wall", {0.45, 0.44, 0.42, 0.40, 0.38, 0.36, 0.42, 0.46}, 0.08, 20.0},
    };
}

} // namespace spectag
