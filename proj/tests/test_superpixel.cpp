#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "spectag/superpixel.hpp"

#include "test_helpers.hpp"

using namespace spectag;
using testutil::constant_stack;
using testutil::make_stack;

namespace {

void check_partition(const SuperpixelSegmentation& seg) {
    REQUIRE(seg.count >= 1);
    size_t total = 0;
    for (int id = 0; id < seg.count; ++id) {
        REQUIRE_FALSE(seg.regions[id].empty());
        total += seg.regions[id].size();
        for (int32_t p : seg.regions[id]) REQUIRE(seg.labels[static_cast<size_t>(p)] == id);
    }
    REQUIRE(total == static_cast<size_t>(seg.width) * seg.height);
}

void check_connectivity(const SuperpixelSegmentation& seg) {
    for (int id = 0; id < seg.count; ++id) {
        std::vector<char> seen(seg.regions[id].size(), 0);
        std::set<int32_t> members(seg.regions[id].begin(), seg.regions[id].end());
        std::vector<int32_t> stack = {seg.regions[id][0]};
        std::set<int32_t> reached;
        reached.insert(seg.regions[id][0]);
        while (!stack.empty()) {
            const int32_t p = stack.back();
            stack.pop_back();
            const int x = p % seg.width;
            const int y = p / seg.width;
            const int32_t nbrs[4] = {p - 1, p + 1, p - seg.width, p + seg.width};
            const bool ok[4] = {x > 0, x + 1 < seg.width, y > 0, y + 1 < seg.height};
            for (int k = 0; k < 4; ++k) {
                if (!ok[k]) continue;
                if (members.count(nbrs[k]) && !reached.count(nbrs[k])) {
                    reached.insert(nbrs[k]);
                    stack.push_back(nbrs[k]);
                }
            }
        }
        REQUIRE(reached.size() == seg.regions[id].size());
    }
}

} // namespace

TEST_CASE("lsc on a uniform image yields an approximately regular grid") {
    const auto rgb = constant_stack(128, 96, {700, 560, 470}, 0.4);
    const auto seg = lsc_segment(rgb, 32, 0.1);
    check_partition(seg);
    check_connectivity(seg);
    // 4x3 seed grid
    REQUIRE(seg.count >= 9);
    REQUIRE(seg.count <= 15);
    // regions stay local: bounding boxes no wider than ~2 cells
    for (int id = 0; id < seg.count; ++id) {
        int x0 = seg.width, x1 = 0, y0 = seg.height, y1 = 0;
        for (int32_t p : seg.regions[id]) {
            x0 = std::min(x0, p % seg.width);
            x1 = std::max(x1, p % seg.width);
            y0 = std::min(y0, p / seg.width);
            y1 = std::max(y1, p / seg.width);
        }
        REQUIRE(x1 - x0 <= 2 * 32);
        REQUIRE(y1 - y0 <= 2 * 32);
    }
}

TEST_CASE("lsc adheres to a two-color vertical edge") {
    const int w = 128, h = 96, edge = 64;
    const auto rgb = make_stack(w, h, {700, 560, 470}, [&](int c, int x, int) {
        return x < edge ? (c == 0 ? 0.7 : 0.25) : (c == 2 ? 0.7 : 0.25);
    });
    const auto seg = lsc_segment(rgb, 32, 0.1);
    check_partition(seg);
    // boundary recall: label transitions across the color edge must hug the
    // true edge column, so no region may spill across it by more than a
    // 1-px sliver (5% of its area at worst)
    for (int id = 0; id < seg.count; ++id) {
        int left = 0, right = 0;
        for (int32_t p : seg.regions[id]) {
            const int x = p % w;
            (x < edge ? left : right) += 1;
        }
        const int minority = std::min(left, right);
        const int size = left + right;
        REQUIRE(minority <= std::max(1, size / 20));
    }
}

TEST_CASE("lsc is deterministic") {
    const auto rgb = make_stack(96, 64, {700, 560, 470}, [](int c, int x, int y) {
        return 0.2 + 0.3 * std::sin(0.11 * x + c) * std::cos(0.07 * y);
    });
    const auto a = lsc_segment(rgb, 24, 0.1);
    const auto b = lsc_segment(rgb, 24, 0.1);
    REQUIRE(a.labels == b.labels);
    REQUIRE(a.count == b.count);
}

TEST_CASE("lsc superpixel count near the protocol geometry") {
    // 1228x1029 with avg_size 150: the acquisition protocol reports ~55
    const auto rgb = make_stack(1228, 1029, {700, 560, 470}, [](int c, int x, int y) {
        return 0.3 + 0.2 * std::sin(0.004 * x + 0.5 * c) + 0.1 * std::cos(0.003 * y);
    });
    const auto seg = lsc_segment(rgb, 150, 0.1);
    check_partition(seg);
    REQUIRE(seg.count >= 46);
    REQUIRE(seg.count <= 66);
    // contract band: within +-50% of ceil(W*H/avg^2) = 57
    REQUIRE(seg.count >= 29);
    REQUIRE(seg.count <= 85);
}

TEST_CASE("lsc rejects images smaller than one seed cell") {
    const auto rgb = constant_stack(16, 16, {700, 560, 470}, 0.5);
    REQUIRE_THROWS_AS(lsc_segment(rgb, 16, 0.1), DataError);
    REQUIRE_THROWS_AS(lsc_segment(rgb, 20, 0.1), DataError);
}

TEST_CASE("region_stats counts unmasked pixels") {
    const auto rgb = constant_stack(64, 64, {700, 560, 470}, 0.4);
    const auto seg = lsc_segment(rgb, 16, 0.1);

    SECTION("empty mask counts equal region sizes") {
        const PixelMask mask(64, 64);
        const auto counts = region_stats(seg, mask);
        for (int id = 0; id < seg.count; ++id)
            REQUIRE(counts[id] == static_cast<int64_t>(seg.regions[id].size()));
    }
    SECTION("fully masked image gives all zero") {
        PixelMask mask(64, 64);
        std::fill(mask.bits.begin(), mask.bits.end(), 1);
        for (int64_t c : region_stats(seg, mask)) REQUIRE(c == 0);
    }
    SECTION("disc mask reduces overlapped regions by the overlap") {
        PixelMask mask(64, 64);
        int64_t in_disc_by_region[256] = {0};
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const double dx = x - 20.0, dy = y - 22.0;
                if (dx * dx + dy * dy <= 49.0) {
                    mask.set(x, y);
                    ++in_disc_by_region[seg.labels[static_cast<size_t>(y) * 64 + x]];
                }
            }
        const auto counts = region_stats(seg, mask);
        for (int id = 0; id < seg.count; ++id)
            REQUIRE(counts[id] ==
                    static_cast<int64_t>(seg.regions[id].size()) - in_disc_by_region[id]);
    }
}
