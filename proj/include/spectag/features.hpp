#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "spectag/errors.hpp"
#include "spectag/grid.hpp"
#include "spectag/image.hpp"
#include "spectag/superpixel.hpp"

namespace spectag {

struct LbpPair {
    int radius = 1;
    int points = 8;
};

struct LbpConfig {
    std::vector<LbpPair> pairs = {{1, 8}, {2, 16}, {3, 24}};

    void validate() const {
        if (pairs.empty()) throw ConfigError("LbpConfig: at least one (R,P) pair required");
        for (const auto& rp : pairs) {
            if (rp.radius < 1) throw ConfigError("LbpConfig: radius must be >= 1");
            if (rp.points < 4) throw ConfigError("LbpConfig: point count must be >= 4");
        }
    }

    // total histogram length across pairs: sum of (P + 2)
    int histogram_length() const {
        int n = 0;
        for (const auto& rp : pairs) n += rp.points + 2;
        return n;
    }

    int max_radius() const {
        int r = 0;
        for (const auto& rp : pairs) r = std::max(r, rp.radius);
        return r;
    }
};

constexpr int16_t kInvalidCode = -1;

// Rotation-invariant uniform code from already-sampled neighbor values:
// s_p = (g_p >= g_c), U = circular transition count, code = sum(s) when
// U <= 2, else P+1.
inline int riu2_code_from_samples(const std::vector<double>& samples, double center) {
    const int p_count = static_cast<int>(samples.size());
    int sum = 0;
    int transitions = 0;
    int prev = samples[p_count - 1] >= center ? 1 : 0;
    for (int p = 0; p < p_count; ++p) {
        const int s = samples[p] >= center ? 1 : 0;
        sum += s;
        transitions += s != prev;
        prev = s;
    }
    return transitions <= 2 ? sum : p_count + 1;
}

inline int riu2_code_from_signs(const std::vector<int>& signs) {
    const int p_count = static_cast<int>(signs.size());
    int sum = 0;
    int transitions = 0;
    int prev = signs[p_count - 1];
    for (int s : signs) {
        sum += s != 0;
        transitions += (s != 0) != (prev != 0);
        prev = s;
    }
    return transitions <= 2 ? sum : p_count + 1;
}

// Per-pixel LBP_riu2 codes. Neighbors sit on the radius-R circle starting on
// the positive x axis, counter-clockwise, sampled with bilinear
// interpolation; pixels whose neighborhood touches the border or a masked
// pixel get kInvalidCode.
inline std::vector<int16_t> lbp_code_map(const Grid& channel, int radius, int points,
                                         const PixelMask* mask = nullptr) {
    if (radius < 1) throw ConfigError("lbp_code_map: radius must be >= 1");
    if (points < 4) throw ConfigError("lbp_code_map: point count must be >= 4");
    if (mask && !mask->matches(channel.width, channel.height))
        throw DataError("lbp_code_map: mask dimensions differ");

    const int w = channel.width;
    const int h = channel.height;
    std::vector<int16_t> codes(channel.size(), kInvalidCode);
    if (w <= 2 * radius || h <= 2 * radius) return codes;

    struct Offset {
        int ix, iy;      // integer part of the sample offset
        double fx, fy;   // fractional part
        bool need_x1, need_y1;
    };
    std::vector<Offset> offsets(points);
    for (int p = 0; p < points; ++p) {
        const double angle = 2.0 * std::numbers::pi * p / points;
        double ox = radius * std::cos(angle);
        double oy = radius * std::sin(angle);
        if (std::abs(ox - std::round(ox)) < 1e-9) ox = std::round(ox);
        if (std::abs(oy - std::round(oy)) < 1e-9) oy = std::round(oy);
        Offset o;
        o.ix = static_cast<int>(std::floor(ox));
        o.iy = static_cast<int>(std::floor(oy));
        o.fx = ox - o.ix;
        o.fy = oy - o.iy;
        o.need_x1 = o.fx > 0.0;
        o.need_y1 = o.fy > 0.0;
        offsets[p] = o;
    }

    const double* v = channel.values.data();
    std::vector<int> signs(points);
    for (int y = radius; y < h - radius; ++y) {
        for (int x = radius; x < w - radius; ++x) {
            const size_t c = static_cast<size_t>(y) * w + x;
            if (mask && mask->masked(c)) continue;
            const double center = v[c];
            bool valid = true;
            for (int p = 0; p < points; ++p) {
                const Offset& o = offsets[p];
                const int x0 = x + o.ix;
                const int y0 = y + o.iy;
                const size_t base = static_cast<size_t>(y0) * w + x0;
                if (mask) {
                    if (mask->masked(base) || (o.need_x1 && mask->masked(base + 1)) ||
                        (o.need_y1 && mask->masked(base + w)) ||
                        (o.need_x1 && o.need_y1 && mask->masked(base + w + 1))) {
                        valid = false;
                        break;
                    }
                }
                // fused form: exact when the fractional part or the value
                // differences are zero
                const double v00 = v[base];
                const double v10 = o.need_x1 ? v[base + 1] : v00;
                const double v01 = o.need_y1 ? v[base + w] : v00;
                const double v11 = (o.need_x1 && o.need_y1) ? v[base + w + 1] : v01;
                const double top = v00 + o.fx * (v10 - v00);
                const double bot = v01 + o.fx * (v11 - v01);
                const double sample = top + o.fy * (bot - top);
                signs[p] = sample >= center ? 1 : 0;
            }
            if (!valid) continue;
            codes[c] = static_cast<int16_t>(riu2_code_from_signs(signs));
        }
    }
    return codes;
}

// Histogram over the P+2 code alphabet, normalized to sum 1 over the valid
// region pixels.
inline std::vector<double> lbp_histogram(const std::vector<int16_t>& codes, int points,
                                         const std::vector<int32_t>& region) {
    std::vector<double> hist(static_cast<size_t>(points) + 2, 0.0);
    int64_t valid = 0;
    for (int32_t p : region) {
        const int16_t code = codes[static_cast<size_t>(p)];
        if (code < 0) continue;
        hist[static_cast<size_t>(code)] += 1.0;
        ++valid;
    }
    if (valid == 0)
        throw DataError("lbp_histogram: region has no valid pixels (degenerate region)");
    for (double& b : hist) b /= static_cast<double>(valid);
    return hist;
}

// Mean reflectance per channel over the unmasked region pixels, then
// L2-normalized across channels.
inline std::vector<double> average_spectrum(const ChannelStack& sr,
                                            const std::vector<int32_t>& region,
                                            const PixelMask* mask = nullptr) {
    sr.validate("average_spectrum");
    const int nc = sr.channel_count();
    std::vector<double> mean(nc, 0.0);
    int64_t m = 0;
    for (int32_t p : region) {
        if (mask && mask->masked(static_cast<size_t>(p))) continue;
        ++m;
        for (int c = 0; c < nc; ++c) mean[c] += sr.channels[c].values[static_cast<size_t>(p)];
    }
    if (m == 0)
        throw DataError("average_spectrum: all region pixels masked (degenerate region)");
    for (double& v : mean) v /= static_cast<double>(m);
    double norm = 0.0;
    for (double v : mean) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 1e-12)
        for (double& v : mean) v /= norm;
    return mean;
}

// A superpixel is degenerate when fewer than this many valid pixels remain
// for any (R,P) code map or no unmasked pixel remains for the spectrum.
constexpr int kMinValidPixels = 16;

struct SpxFeatures {
    std::vector<int32_t> spx_ids;              // non-degenerate superpixels, ascending
    std::vector<std::vector<double>> vectors;  // matching feature vectors
    std::vector<int32_t> degenerate_ids;       // omitted superpixels
    int feature_length = 0;
};

// Per superpixel: concatenation over channels of the (R,P) histograms
// followed by that channel's entry of the L2-normalized average spectrum.
inline SpxFeatures assemble_features(const ChannelStack& sr, const SuperpixelSegmentation& seg,
                                     const PixelMask& mask, const LbpConfig& cfg) {
    sr.validate("assemble_features");
    cfg.validate();
    if (sr.width != seg.width || sr.height != seg.height)
        throw DataError("assemble_features: stack and segmentation dimensions differ");
    if (!mask.matches(sr.width, sr.height))
        throw DataError("assemble_features: mask dimensions differ");

    const int nc = sr.channel_count();
    const int per_channel = cfg.histogram_length() + 1;
    SpxFeatures out;
    out.feature_length = per_channel * nc;

    // code maps per (channel, pair); channel-major
    const int npairs = static_cast<int>(cfg.pairs.size());
    std::vector<std::vector<int16_t>> code_maps(static_cast<size_t>(nc) * npairs);
    for (int c = 0; c < nc; ++c)
        for (int k = 0; k < npairs; ++k)
            code_maps[static_cast<size_t>(c) * npairs + k] =
                lbp_code_map(sr.channels[c], cfg.pairs[k].radius, cfg.pairs[k].points, &mask);

    for (int32_t id = 0; id < seg.count; ++id) {
        const auto& region = seg.regions[id];
        // validity per (R,P) is channel-independent (borders and mask only),
        // so checking the first channel's maps suffices
        bool degenerate = false;
        for (int k = 0; k < npairs && !degenerate; ++k) {
            int64_t valid = 0;
            const auto& codes = code_maps[static_cast<size_t>(k)];
            for (int32_t p : region) valid += codes[static_cast<size_t>(p)] >= 0;
            if (valid < kMinValidPixels) degenerate = true;
        }
        int64_t unmasked = 0;
        for (int32_t p : region) unmasked += !mask.masked(static_cast<size_t>(p));
        if (unmasked < 1) degenerate = true;
        if (degenerate) {
            out.degenerate_ids.push_back(id);
            continue;
        }

        const std::vector<double> spectrum = average_spectrum(sr, region, &mask);
        std::vector<double> feat;
        feat.reserve(static_cast<size_t>(out.feature_length));
        for (int c = 0; c < nc; ++c) {
            for (int k = 0; k < npairs; ++k) {
                const auto hist = lbp_histogram(code_maps[static_cast<size_t>(c) * npairs + k],
                                                cfg.pairs[k].points, region);
                feat.insert(feat.end(), hist.begin(), hist.end());
            }
            feat.push_back(spectrum[c]);
        }
        out.spx_ids.push_back(id);
        out.vectors.push_back(std::move(feat));
    }
    return out;
}

} // namespace spectag
