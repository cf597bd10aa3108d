#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "spectag/image.hpp"

#include "test_helpers.hpp"

using namespace spectag;
using testutil::constant_stack;
using testutil::flat_calibration;
using testutil::make_grid;
using testutil::make_stack;

namespace {
const std::vector<double> kBands = {470, 480, 511, 560, 580, 600, 660, 700};
}

TEST_CASE("normalize_reflectance identities") {
    const auto calib = flat_calibration(8, 6, kBands, 0.1, 0.9);

    SECTION("I = W gives Sr = 1 everywhere") {
        const auto sr = normalize_reflectance(calib.white, calib);
        for (const auto& ch : sr.channels)
            for (double v : ch.values) REQUIRE(v == 1.0);
    }
    SECTION("I = D gives Sr = 0 everywhere") {
        const auto sr = normalize_reflectance(calib.dark, calib);
        for (const auto& ch : sr.channels)
            for (double v : ch.values) REQUIRE(v == 0.0);
    }
    SECTION("I = (W+D)/2 gives Sr = 0.5 everywhere") {
        const auto mid = constant_stack(8, 6, kBands, (0.1 + 0.9) / 2.0);
        const auto sr = normalize_reflectance(mid, calib);
        for (const auto& ch : sr.channels)
            for (double v : ch.values) REQUIRE(v == 0.5);
    }
}

TEST_CASE("normalize_reflectance clamps out-of-range values") {
    const auto calib = flat_calibration(4, 4, {500}, 0.2, 0.8);
    const auto hot = constant_stack(4, 4, {500}, 0.95); // above white
    const auto cold = constant_stack(4, 4, {500}, 0.05);
    REQUIRE(normalize_reflectance(hot, calib).channels[0].values[0] == 1.0);
    REQUIRE(normalize_reflectance(cold, calib).channels[0].values[0] == 0.0);
}

TEST_CASE("normalize_reflectance errors") {
    const auto calib = flat_calibration(4, 4, {500, 600}, 0.1, 0.9);

    SECTION("dimension mismatch") {
        const auto raw = constant_stack(5, 4, {500, 600}, 0.5);
        REQUIRE_THROWS_AS(normalize_reflectance(raw, calib), DataError);
    }
    SECTION("wavelength mismatch") {
        const auto raw = constant_stack(4, 4, {500, 601}, 0.5);
        REQUIRE_THROWS_AS(normalize_reflectance(raw, calib), DataError);
    }
    SECTION("degenerate calibration names the channel") {
        auto bad = calib;
        bad.white.channels[1].at(2, 3) = bad.dark.channels[1].at(2, 3);
        const auto raw = constant_stack(4, 4, {500, 600}, 0.5);
        try {
            normalize_reflectance(raw, bad);
            FAIL("expected CalibrationError");
        } catch (const CalibrationError& e) {
            const std::string msg = e.what();
            REQUIRE(msg.find("channel 1") != std::string::npos);
            REQUIRE(msg.find("600") != std::string::npos);
        }
    }
}

TEST_CASE("normalize_reflectance is affine invariant under common scaling") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.2, 0.8);
    auto raw = make_stack(6, 5, {500}, [&](int, int, int) { return u(rng); });
    const auto calib = flat_calibration(6, 5, {500}, 0.125, 0.875);
    const auto sr = normalize_reflectance(raw, calib);

    for (double scale : {2.0, 0.5, 4.0}) { // powers of two keep the identity exact
        auto raw2 = raw;
        auto calib2 = calib;
        for (auto& ch : raw2.channels)
            for (double& v : ch.values) v *= scale;
        for (auto& ch : calib2.dark.channels)
            for (double& v : ch.values) v *= scale;
        for (auto& ch : calib2.white.channels)
            for (double& v : ch.values) v *= scale;
        const auto sr2 = normalize_reflectance(raw2, calib2);
        for (size_t i = 0; i < sr.channels[0].size(); ++i)
            REQUIRE(sr2.channels[0].values[i] == sr.channels[0].values[i]);
    }
    // general positive scale within floating-point tolerance
    const double scale = 1.7;
    auto raw2 = raw;
    auto calib2 = calib;
    for (auto& ch : raw2.channels)
        for (double& v : ch.values) v *= scale;
    for (auto& ch : calib2.dark.channels)
        for (double& v : ch.values) v *= scale;
    for (auto& ch : calib2.white.channels)
        for (double& v : ch.values) v *= scale;
    const auto sr2 = normalize_reflectance(raw2, calib2);
    for (size_t i = 0; i < sr.channels[0].size(); ++i)
        REQUIRE_THAT(sr2.channels[0].values[i],
                     Catch::Matchers::WithinAbs(sr.channels[0].values[i], 1e-12));
}

TEST_CASE("anisotropic_diffusion basics") {
    SECTION("constant grid is a fixed point") {
        const Grid g(16, 12, 0.4);
        const Grid out = anisotropic_diffusion(g, 25, 0.02, 0.2);
        for (size_t i = 0; i < g.size(); ++i) REQUIRE(out.values[i] == g.values[i]);
    }
    SECTION("zero iterations returns the input unchanged") {
        const auto g = make_grid(9, 7, [](int x, int y) { return 0.01 * (x + 3 * y); });
        const Grid out = anisotropic_diffusion(g, 0, 0.02, 0.2);
        REQUIRE(out.values == g.values);
    }
    SECTION("noise variance strictly decreases") {
        std::mt19937_64 rng(11);
        std::normal_distribution<double> n(0.0, 0.05);
        auto g = make_grid(32, 32, [&](int, int) { return 0.5 + n(rng); });
        const double var_in = g.variance();
        const Grid out = anisotropic_diffusion(g, 10, 0.1, 0.2);
        REQUIRE(out.variance() < var_in);
    }
    SECTION("parameter and input validation") {
        const Grid g(8, 8, 0.5);
        REQUIRE_THROWS_AS(anisotropic_diffusion(g, -1, 0.02, 0.2), ConfigError);
        REQUIRE_THROWS_AS(anisotropic_diffusion(g, 5, 0.02, 0.3), ConfigError);
        REQUIRE_THROWS_AS(anisotropic_diffusion(g, 5, 0.02, 0.0), ConfigError);
        Grid bad = g;
        bad.values[3] = std::numeric_limits<double>::quiet_NaN();
        REQUIRE_THROWS_AS(anisotropic_diffusion(bad, 5, 0.02, 0.2), DataError);
    }
}

TEST_CASE("anisotropic_diffusion conserves the grid sum") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto g = make_grid(40, 30, [&](int, int) { return u(rng); });
    const double sum_in = g.sum();
    const Grid out = anisotropic_diffusion(g, 100, 0.05, 0.2);
    REQUIRE_THAT(out.sum() / sum_in, Catch::Matchers::WithinAbs(1.0, 1e-6));
}

TEST_CASE("mask_specular") {
    SECTION("all-zero stack gives an empty mask") {
        const auto s = constant_stack(10, 8, {700, 560, 470}, 0.0);
        REQUIRE(mask_specular(s, {0, 1, 2}, 0.95).count() == 0);
    }
    SECTION("a single saturated pixel is exactly the mask") {
        auto s = constant_stack(10, 8, {700, 560, 470}, 0.3);
        s.channels[1].at(4, 5) = 1.0;
        const auto mask = mask_specular(s, {0, 1, 2}, 0.95);
        REQUIRE(mask.count() == 1);
        REQUIRE(mask.masked(4, 5));
    }
    SECTION("bright disc on dim background is masked exactly") {
        std::set<std::pair<int, int>> disc;
        const auto s = make_stack(32, 32, {700, 560, 470}, [&](int, int x, int y) {
            const double dx = x - 16.0, dy = y - 16.0;
            return dx * dx + dy * dy <= 36.0 ? 0.99 : 0.3;
        });
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                const double dx = x - 16.0, dy = y - 16.0;
                if (dx * dx + dy * dy <= 36.0) disc.insert({x, y});
            }
        const auto mask = mask_specular(s, {0, 1, 2}, 0.95);
        std::set<std::pair<int, int>> got;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (mask.masked(x, y)) got.insert({x, y});
        REQUIRE(got == disc);
    }
    SECTION("lower threshold masks a superset") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const auto s = make_stack(24, 24, {700, 560, 470},
                                  [&](int, int, int) { return u(rng); });
        const auto hi = mask_specular(s, {0, 1, 2}, 0.9);
        const auto lo = mask_specular(s, {0, 1, 2}, 0.6);
        for (size_t i = 0; i < hi.bits.size(); ++i)
            if (hi.bits[i]) REQUIRE(lo.bits[i]);
        REQUIRE(lo.count() >= hi.count());
    }
    SECTION("fewer than 3 channels fails") {
        const auto s = constant_stack(8, 8, {500, 600}, 0.2);
        REQUIRE_THROWS_AS(mask_specular(s, {0, 1, 1}, 0.95), DataError);
    }
}

TEST_CASE("simulate_rgb") {
    SECTION("default selection picks 700/560/470 from the 8-band stack") {
        const auto s = make_stack(6, 4, kBands, [](int c, int, int) { return 0.1 * c; });
        const auto rgb = simulate_rgb(s);
        REQUIRE(rgb.wavelengths == std::vector<double>{700, 560, 470});
        REQUIRE(rgb.channels[0].values == s.channels[7].values);
        REQUIRE(rgb.channels[1].values == s.channels[3].values);
        REQUIRE(rgb.channels[2].values == s.channels[0].values);
    }
    SECTION("identity selection on a 3-band stack") {
        const auto s = make_stack(5, 5, {700, 560, 470}, [](int c, int x, int y) {
            return 0.05 * (c + x + y);
        });
        const auto rgb = simulate_rgb(s, {0, 1, 2});
        REQUIRE(rgb.wavelengths == s.wavelengths);
        for (int c = 0; c < 3; ++c) REQUIRE(rgb.channels[c].values == s.channels[c].values);
    }
    SECTION("absent wavelength fails") {
        const auto s = constant_stack(4, 4, {700, 560, 470}, 0.5);
        REQUIRE_THROWS_AS(s.band_index(511), DataError);
        REQUIRE_THROWS_AS(rgb_band_indices(s, {700, 560, 511}), DataError);
    }
    SECTION("duplicate indices fail") {
        const auto s = constant_stack(4, 4, {700, 560, 470}, 0.5);
        REQUIRE_THROWS_AS(simulate_rgb(s, {0, 0, 2}), DataError);
    }
}
