#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "spectag/errors.hpp"
#include "spectag/grid.hpp"
#include "spectag/image.hpp"

namespace spectag {

// Total partition of an image into connected superpixels with dense ids.
struct SuperpixelSegmentation {
    int width = 0;
    int height = 0;
    int count = 0;
    std::vector<int32_t> labels;                 // per pixel, [0, count)
    std::vector<std::vector<int32_t>> regions;   // per id, pixel indices
    std::vector<std::vector<int32_t>> adjacency; // per id, neighbor ids, sorted
};

namespace lsc_detail {

constexpr int kFeatureDim = 10;
constexpr int kMaxIterations = 20;
constexpr double kConvergedFraction = 0.001; // stop when <0.1% of pixels move

struct ClusterState {
    std::array<double, kFeatureDim> feature_sum{};
    double weight_sum = 0.0;
    double x_sum = 0.0;
    double y_sum = 0.0;
    int64_t size = 0;
    std::array<double, kFeatureDim> mean{};
    double cx = 0.0;
    double cy = 0.0;
};

} // namespace lsc_detail

// Linear spectral clustering: weighted kernel k-means in a 10-dimensional
// cosine/sine embedding of the three color channels and the two spatial
// coordinates. Seeds start on a regular grid of pitch avg_size, assignment
// runs in a local window, and connectivity is enforced afterwards by merging
// orphaned fragments into the neighboring region with the most shared
// boundary.
inline SuperpixelSegmentation lsc_segment(const ChannelStack& rgb, int avg_size,
                                          double compactness) {
    rgb.validate("lsc_segment");
    if (rgb.channel_count() != 3) throw DataError("lsc_segment: expected a 3-channel stack");
    if (!(compactness > 0.0) || compactness > 1.0)
        throw ConfigError("lsc_segment: compactness must lie in (0, 1]");
    const int w = rgb.width;
    const int h = rgb.height;
    if (avg_size < 2) throw ConfigError("lsc_segment: avg_size must be >= 2");
    if (static_cast<int64_t>(avg_size) * avg_size >= static_cast<int64_t>(w) * h)
        throw DataError("lsc_segment: image smaller than one seed cell");

    using namespace lsc_detail;
    const size_t n_px = static_cast<size_t>(w) * h;
    const double half_pi = std::numbers::pi / 2.0;

    // Pixel embedding psi = phi / w(p), with w(p) = phi(p) . mean(phi) so the
    // clustering approximates a normalized cut. Spatial angles are normalized
    // over the image extent; the compactness weight is rescaled by
    // extent/avg_size so its effect is independent of image size.
    const double ws_x = compactness * std::max(1, w - 1) / static_cast<double>(avg_size);
    const double ws_y = compactness * std::max(1, h - 1) / static_cast<double>(avg_size);
    std::vector<float> psi(n_px * kFeatureDim);
    {
        std::array<double, kFeatureDim> sigma{};
        std::vector<double> xcos(w), xsin(w), ycos(h), ysin(h);
        for (int x = 0; x < w; ++x) {
            const double t = half_pi * x / std::max(1, w - 1);
            xcos[x] = ws_x * std::cos(t);
            xsin[x] = ws_x * std::sin(t);
        }
        for (int y = 0; y < h; ++y) {
            const double t = half_pi * y / std::max(1, h - 1);
            ycos[y] = ws_y * std::cos(t);
            ysin[y] = ws_y * std::sin(t);
        }
        std::vector<double> phi(n_px * kFeatureDim);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const size_t p = static_cast<size_t>(y) * w + x;
                double* f = &phi[p * kFeatureDim];
                for (int c = 0; c < 3; ++c) {
                    const double v = std::clamp(rgb.channels[c].values[p], 0.0, 1.0);
                    f[2 * c] = std::cos(half_pi * v);
                    f[2 * c + 1] = std::sin(half_pi * v);
                }
                f[6] = xcos[x];
                f[7] = xsin[x];
                f[8] = ycos[y];
                f[9] = ysin[y];
                for (int k = 0; k < kFeatureDim; ++k) sigma[k] += f[k];
            }
        }
        for (double& s : sigma) s /= static_cast<double>(n_px);
        for (size_t p = 0; p < n_px; ++p) {
            const double* f = &phi[p * kFeatureDim];
            double weight = 0.0;
            for (int k = 0; k < kFeatureDim; ++k) weight += f[k] * sigma[k];
            weight = std::max(weight, 1e-12);
            for (int k = 0; k < kFeatureDim; ++k)
                psi[p * kFeatureDim + k] = static_cast<float>(f[k] / weight);
        }
    }

    // Seeds on a regular grid, each perturbed to the lowest-gradient pixel in
    // its 3x3 neighborhood.
    const int nx = std::max(1, static_cast<int>(std::lround(static_cast<double>(w) / avg_size)));
    const int ny = std::max(1, static_cast<int>(std::lround(static_cast<double>(h) / avg_size)));
    const int n_seeds = nx * ny;
    auto gradient_at = [&](int x, int y) {
        double g = 0.0;
        const int xm = std::max(0, x - 1), xp = std::min(w - 1, x + 1);
        const int ym = std::max(0, y - 1), yp = std::min(h - 1, y + 1);
        for (int c = 0; c < 3; ++c) {
            const Grid& ch = rgb.channels[c];
            g += std::abs(ch.at(xp, y) - ch.at(xm, y)) + std::abs(ch.at(x, yp) - ch.at(x, ym));
        }
        return g;
    };
    std::vector<std::pair<int, int>> seeds(n_seeds);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            int sx = std::min(w - 1, static_cast<int>((i + 0.5) * w / nx));
            int sy = std::min(h - 1, static_cast<int>((j + 0.5) * h / ny));
            double best = gradient_at(sx, sy);
            int bx = sx, by = sy;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int x = sx + dx, y = sy + dy;
                    if (x < 0 || x >= w || y < 0 || y >= h) continue;
                    const double g = gradient_at(x, y);
                    if (g < best) {
                        best = g;
                        bx = x;
                        by = y;
                    }
                }
            seeds[j * nx + i] = {bx, by};
        }
    }

    // Initial assignment by grid cell.
    std::vector<int32_t> labels(n_px);
    for (int y = 0; y < h; ++y) {
        const int row = std::min(ny - 1, y * ny / h);
        for (int x = 0; x < w; ++x) {
            const int col = std::min(nx - 1, x * nx / w);
            labels[static_cast<size_t>(y) * w + x] = row * nx + col;
        }
    }

    std::vector<ClusterState> clusters(n_seeds);
    auto refresh_clusters = [&] {
        for (auto& c : clusters) {
            c.feature_sum.fill(0.0);
            c.weight_sum = 0.0;
            c.x_sum = c.y_sum = 0.0;
            c.size = 0;
        }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const size_t p = static_cast<size_t>(y) * w + x;
                ClusterState& c = clusters[labels[p]];
                const float* f = &psi[p * kFeatureDim];
                for (int k = 0; k < kFeatureDim; ++k) c.feature_sum[k] += f[k];
                c.weight_sum += 1.0;
                c.x_sum += x;
                c.y_sum += y;
                ++c.size;
            }
        for (auto& c : clusters) {
            if (c.size == 0) continue; // empty clusters keep their last mean
            for (int k = 0; k < kFeatureDim; ++k) c.mean[k] = c.feature_sum[k] / c.weight_sum;
            c.cx = c.x_sum / static_cast<double>(c.size);
            c.cy = c.y_sum / static_cast<double>(c.size);
        }
    };
    for (int s = 0; s < n_seeds; ++s) {
        clusters[s].cx = seeds[s].first;
        clusters[s].cy = seeds[s].second;
    }
    refresh_clusters();

    const int window = static_cast<int>(std::lround(1.5 * avg_size));
    std::vector<float> best_dist(n_px);
    std::vector<int32_t> next_labels(n_px);
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        std::fill(best_dist.begin(), best_dist.end(), std::numeric_limits<float>::max());
        next_labels = labels;
        for (int s = 0; s < n_seeds; ++s) {
            const ClusterState& c = clusters[s];
            if (c.size == 0) continue;
            const int x0 = std::max(0, static_cast<int>(c.cx) - window);
            const int x1 = std::min(w - 1, static_cast<int>(c.cx) + window);
            const int y0 = std::max(0, static_cast<int>(c.cy) - window);
            const int y1 = std::min(h - 1, static_cast<int>(c.cy) + window);
            for (int y = y0; y <= y1; ++y) {
                const size_t row = static_cast<size_t>(y) * w;
                for (int x = x0; x <= x1; ++x) {
                    const size_t p = row + x;
                    const float* f = &psi[p * kFeatureDim];
                    double d = 0.0;
                    for (int k = 0; k < kFeatureDim; ++k) {
                        const double diff = f[k] - c.mean[k];
                        d += diff * diff;
                    }
                    // strict < keeps the lowest cluster id on exact ties
                    if (static_cast<float>(d) < best_dist[p]) {
                        best_dist[p] = static_cast<float>(d);
                        next_labels[p] = s;
                    }
                }
            }
        }
        size_t changed = 0;
        for (size_t p = 0; p < n_px; ++p) changed += next_labels[p] != labels[p];
        labels.swap(next_labels);
        refresh_clusters();
        if (changed < kConvergedFraction * static_cast<double>(n_px)) break;
    }

    // Connectivity enforcement: connected components per cluster id; the
    // largest component of each id (if big enough) survives, every other
    // fragment merges into the touching region with the longest shared border.
    const int64_t min_size =
        std::max<int64_t>(1, static_cast<int64_t>(avg_size) * avg_size / 16);
    std::vector<int32_t> comp_id(n_px, -1);
    struct Component {
        int32_t cluster = 0;
        int64_t size = 0;
        size_t first_pixel = 0;
        int32_t region = -1; // resolved final region root, -1 while orphaned
    };
    std::vector<Component> comps;
    {
        std::vector<size_t> stack;
        for (size_t start = 0; start < n_px; ++start) {
            if (comp_id[start] >= 0) continue;
            const int32_t cid = static_cast<int32_t>(comps.size());
            comps.push_back({labels[start], 0, start, -1});
            stack.push_back(start);
            comp_id[start] = cid;
            while (!stack.empty()) {
                const size_t p = stack.back();
                stack.pop_back();
                ++comps[cid].size;
                const int x = static_cast<int>(p % w);
                const int y = static_cast<int>(p / w);
                const size_t nbrs[4] = {p - 1, p + 1, p - w, p + w};
                const bool ok[4] = {x > 0, x + 1 < w, y > 0, y + 1 < h};
                for (int k = 0; k < 4; ++k) {
                    if (!ok[k]) continue;
                    const size_t q = nbrs[k];
                    if (comp_id[q] < 0 && labels[q] == labels[start]) {
                        comp_id[q] = cid;
                        stack.push_back(q);
                    }
                }
            }
        }
    }
    // keeper = largest component of each cluster id, if it meets min_size
    std::vector<int32_t> keeper_of_cluster(n_seeds, -1);
    for (size_t c = 0; c < comps.size(); ++c) {
        const int32_t cl = comps[c].cluster;
        const int32_t cur = keeper_of_cluster[cl];
        if (cur < 0 || comps[c].size > comps[cur].size) keeper_of_cluster[cl] = static_cast<int32_t>(c);
    }
    std::vector<int32_t> keepers;
    for (int s = 0; s < n_seeds; ++s) {
        const int32_t k = keeper_of_cluster[s];
        if (k >= 0 && comps[k].size >= min_size) keepers.push_back(k);
    }
    if (keepers.empty()) {
        // degenerate fallback: keep the single largest component
        int32_t best = 0;
        for (size_t c = 1; c < comps.size(); ++c)
            if (comps[c].size > comps[best].size) best = static_cast<int32_t>(c);
        keepers.push_back(best);
    }
    std::sort(keepers.begin(), keepers.end(),
              [&](int32_t a, int32_t b) { return comps[a].first_pixel < comps[b].first_pixel; });
    for (size_t r = 0; r < keepers.size(); ++r) comps[keepers[r]].region = static_cast<int32_t>(r);

    // Iteratively attach orphans to already-resolved neighbors.
    std::vector<int32_t> orphans;
    for (size_t c = 0; c < comps.size(); ++c)
        if (comps[c].region < 0) orphans.push_back(static_cast<int32_t>(c));
    std::sort(orphans.begin(), orphans.end(),
              [&](int32_t a, int32_t b) { return comps[a].first_pixel < comps[b].first_pixel; });
    // pixel lists per component for boundary walks
    std::vector<std::vector<size_t>> comp_pixels(comps.size());
    for (size_t p = 0; p < n_px; ++p) comp_pixels[comp_id[p]].push_back(p);
    while (!orphans.empty()) {
        bool progress = false;
        std::vector<int32_t> still;
        for (int32_t oc : orphans) {
            std::vector<std::pair<int32_t, int64_t>> contact; // region -> shared border
            auto add_contact = [&](int32_t region) {
                for (auto& [r, n] : contact)
                    if (r == region) {
                        ++n;
                        return;
                    }
                contact.push_back({region, 1});
            };
            for (size_t p : comp_pixels[oc]) {
                const int x = static_cast<int>(p % w);
                const int y = static_cast<int>(p / w);
                const size_t nbrs[4] = {p - 1, p + 1, p - w, p + w};
                const bool ok[4] = {x > 0, x + 1 < w, y > 0, y + 1 < h};
                for (int k = 0; k < 4; ++k) {
                    if (!ok[k]) continue;
                    const int32_t nc = comp_id[nbrs[k]];
                    if (nc != oc && comps[nc].region >= 0) add_contact(comps[nc].region);
                }
            }
            if (contact.empty()) {
                still.push_back(oc);
                continue;
            }
            std::sort(contact.begin(), contact.end(), [](const auto& a, const auto& b) {
                return a.second != b.second ? a.second > b.second : a.first < b.first;
            });
            comps[oc].region = contact.front().first;
            progress = true;
        }
        if (!progress)
            throw NumericError("lsc_segment: connectivity enforcement failed to resolve fragments");
        orphans.swap(still);
    }

    SuperpixelSegmentation seg;
    seg.width = w;
    seg.height = h;
    seg.count = static_cast<int>(keepers.size());
    seg.labels.resize(n_px);
    for (size_t p = 0; p < n_px; ++p) seg.labels[p] = comps[comp_id[p]].region;
    seg.regions.assign(seg.count, {});
    for (size_t p = 0; p < n_px; ++p) seg.regions[seg.labels[p]].push_back(static_cast<int32_t>(p));
    seg.adjacency.assign(seg.count, {});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t p = static_cast<size_t>(y) * w + x;
            const int32_t a = seg.labels[p];
            if (x + 1 < w) {
                const int32_t b = seg.labels[p + 1];
                if (a != b) {
                    seg.adjacency[a].push_back(b);
                    seg.adjacency[b].push_back(a);
                }
            }
            if (y + 1 < h) {
                const int32_t b = seg.labels[p + w];
                if (a != b) {
                    seg.adjacency[a].push_back(b);
                    seg.adjacency[b].push_back(a);
                }
            }
        }
    for (auto& nbrs : seg.adjacency) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    return seg;
}

// Usable (unmasked) pixel count per region.
inline std::vector<int64_t> region_stats(const SuperpixelSegmentation& seg, const PixelMask& mask) {
    if (!mask.matches(seg.width, seg.height))
        throw DataError("region_stats: mask dimensions differ from segmentation");
    std::vector<int64_t> counts(seg.count, 0);
    for (size_t p = 0; p < seg.labels.size(); ++p)
        if (!mask.masked(p)) ++counts[seg.labels[p]];
    return counts;
}

} // namespace spectag
