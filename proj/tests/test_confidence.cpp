#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "spectag/confidence.hpp"

using namespace spectag;

namespace {

std::vector<double> one_hot(size_t n, size_t at) {
    std::vector<double> p(n, 0.0);
    p[at] = 1.0;
    return p;
}

std::vector<double> uniform(size_t n) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

std::vector<double> random_simplex(size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(n);
    double sum = 0.0;
    for (double& v : p) {
        v = -std::log(std::max(1e-12, u(rng)));
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

// independent oracle: mean absolute difference form of the discrete Gini
double gini_mad_oracle(const std::vector<double>& p) {
    double sum = 0.0;
    for (double a : p)
        for (double b : p) sum += std::abs(a - b);
    return sum / (2.0 * (static_cast<double>(p.size()) - 1.0));
}

const std::vector<double> kHalfHalf = {0.5, 0.5, 0.0, 0.0, 0.0, 0.0};

} // namespace

TEST_CASE("normalized entropy endpoints and reference value") {
    REQUIRE_THAT(normalized_entropy(uniform(6)), Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE(normalized_entropy(one_hot(6, 2)) == 0.0); // zero-term convention is exact
    const double expected = std::log(2.0) / std::log(6.0); // direct evaluation
    REQUIRE_THAT(normalized_entropy(kHalfHalf), Catch::Matchers::WithinAbs(expected, 1e-12));
    REQUIRE_THROWS_AS(normalized_entropy({1.0}), DataError);
}

TEST_CASE("ppci endpoints and reference value") {
    REQUIRE_THAT(ppci(uniform(6)), Catch::Matchers::WithinAbs(0.0, 1e-12));
    REQUIRE(ppci(one_hot(6, 0)) == 1.0);
    const double expected = 1.0 - std::log(2.0) / std::log(6.0); // ~0.61315
    REQUIRE_THAT(ppci(kHalfHalf), Catch::Matchers::WithinAbs(expected, 1e-9));
    REQUIRE_THAT(ppci(kHalfHalf), Catch::Matchers::WithinAbs(0.61315, 5e-6));
}

TEST_CASE("gini coefficient endpoints are exact for J in 2..6") {
    for (size_t j = 2; j <= 6; ++j) {
        REQUIRE_THAT(gini_coefficient(uniform(j)), Catch::Matchers::WithinAbs(0.0, 1e-12));
        REQUIRE_THAT(gini_coefficient(one_hot(j, j / 2)), Catch::Matchers::WithinAbs(1.0, 1e-12));
        REQUIRE_THAT(ppci(uniform(j)), Catch::Matchers::WithinAbs(0.0, 1e-12));
        REQUIRE_THAT(ppci(one_hot(j, j - 1)), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("gini of the half-half six-class distribution is 0.8") {
    // Lorentz integral 5/6 by hand, so GC = (2*5/6 - 1) * 6/5 = 0.8;
    // the mean-absolute-difference oracle agrees
    REQUIRE_THAT(gini_coefficient(kHalfHalf), Catch::Matchers::WithinAbs(0.8, 1e-9));
    REQUIRE_THAT(gini_mad_oracle(kHalfHalf), Catch::Matchers::WithinAbs(0.8, 1e-12));
}

TEST_CASE("gini Lorentz construction equals the mean-absolute-difference form") {
    std::mt19937_64 rng(42);
    for (size_t j = 2; j <= 6; ++j)
        for (int trial = 0; trial < 40; ++trial) {
            const auto p = random_simplex(j, rng);
            REQUIRE_THAT(gini_coefficient(p),
                         Catch::Matchers::WithinAbs(gini_mad_oracle(p), 1e-12));
        }
}

TEST_CASE("max confidence") {
    REQUIRE_THAT(max_confidence(uniform(6)), Catch::Matchers::WithinAbs(1.0 / 6.0, 1e-15));
    REQUIRE(max_confidence(one_hot(4, 1)) == 1.0);
    REQUIRE(max_confidence(kHalfHalf) == 0.5);
}

TEST_CASE("all metrics are permutation invariant") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto p = random_simplex(6, rng);
        auto q = p;
        std::shuffle(q.begin(), q.end(), rng);
        REQUIRE_THAT(gini_coefficient(q), Catch::Matchers::WithinAbs(gini_coefficient(p), 1e-12));
        REQUIRE_THAT(ppci(q), Catch::Matchers::WithinAbs(ppci(p), 1e-12));
        REQUIRE(max_confidence(q) == max_confidence(p));
    }
}

TEST_CASE("robin-hood transfers reduce both dispersion metrics") {
    // moving mass from a richer to a poorer entry produces a distribution
    // majorized by the original, so GC and PPCI may only decrease
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
        const auto p = random_simplex(6, rng);
        size_t rich = 0, poor = 0;
        for (size_t i = 1; i < p.size(); ++i) {
            if (p[i] > p[rich]) rich = i;
            if (p[i] < p[poor]) poor = i;
        }
        if (p[rich] - p[poor] < 1e-9) continue;
        auto q = p;
        const double delta = 0.5 * u(rng) * (p[rich] - p[poor]);
        q[rich] -= delta;
        q[poor] += delta;
        REQUIRE(gini_coefficient(q) <= gini_coefficient(p) + 1e-12);
        REQUIRE(ppci(q) <= ppci(p) + 1e-12);
    }
}

TEST_CASE("metric scores stay in the unit interval") {
    std::mt19937_64 rng(13);
    for (size_t j = 2; j <= 6; ++j)
        for (int trial = 0; trial < 30; ++trial) {
            const auto p = random_simplex(j, rng);
            for (auto metric :
                 {ConfidenceMetric::kGini, ConfidenceMetric::kPpci, ConfidenceMetric::kMax}) {
                const double s = confidence_score(metric, p);
                REQUIRE(s >= 0.0);
                REQUIRE(s <= 1.0);
            }
        }
}

TEST_CASE("threshold comparison is strict") {
    // exact boundary: one-hot MAX score is exactly 1.0
    REQUIRE_FALSE(is_confident(one_hot(4, 0), {ConfidenceMetric::kMax, 1.0}));
    REQUIRE(is_confident(one_hot(4, 0), {ConfidenceMetric::kMax, 0.9999}));
    // uniform never clears a threshold of 0.5 on any metric
    for (auto metric : {ConfidenceMetric::kGini, ConfidenceMetric::kPpci, ConfidenceMetric::kMax})
        REQUIRE_FALSE(is_confident(uniform(6), {metric, 0.5}));
    // exact tie at tau = 0.5 with the MAX metric
    REQUIRE_FALSE(is_confident(kHalfHalf, {ConfidenceMetric::kMax, 0.5}));
    // one-hot clears GC thresholds below 1
    REQUIRE(is_confident(one_hot(6, 3), {ConfidenceMetric::kGini, 0.9}));
}

TEST_CASE("metric names round-trip") {
    for (auto metric : {ConfidenceMetric::kGini, ConfidenceMetric::kPpci, ConfidenceMetric::kMax})
        REQUIRE(metric_from_name(metric_name(metric)) == metric);
    REQUIRE_THROWS_AS(metric_from_name("banana"), ConfigError);
}
