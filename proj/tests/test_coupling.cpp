#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "spectag/coupling.hpp"

#include "coupling_oracle.hpp"

using namespace spectag;
using coupling_oracle::random_r;

namespace {
const auto couple_linear_oracle = coupling_oracle::solve;
} // namespace

TEST_CASE("coupling at J=2 returns the pair probability directly") {
    const std::vector<std::vector<double>> r = {{0.0, 0.7}, {0.3, 0.0}};
    const auto p = pairwise_couple(r);
    REQUIRE_THAT(p[0], Catch::Matchers::WithinAbs(0.7, 1e-9));
    REQUIRE_THAT(p[1], Catch::Matchers::WithinAbs(0.3, 1e-9));
}

TEST_CASE("coupling an indifferent matrix gives the uniform distribution") {
    for (size_t n : {2, 3, 4, 5, 6}) {
        std::vector<std::vector<double>> r(n, std::vector<double>(n, 0.5));
        for (size_t i = 0; i < n; ++i) r[i][i] = 0.0;
        const auto p = pairwise_couple(r);
        for (double v : p)
            REQUIRE_THAT(v, Catch::Matchers::WithinAbs(1.0 / static_cast<double>(n), 1e-10));
    }
}

TEST_CASE("coupling matches the dense linear-system oracle") {
    std::mt19937_64 rng(2024);
    for (size_t n : {3, 4, 5, 6}) {
        for (int trial = 0; trial < 25; ++trial) {
            const auto r = random_r(n, rng);
            const auto p = pairwise_couple(r);
            const auto q = couple_linear_oracle(r);
            double sum = 0.0;
            for (size_t i = 0; i < n; ++i) {
                REQUIRE(p[i] >= 0.0);
                sum += p[i];
                REQUIRE_THAT(p[i], Catch::Matchers::WithinAbs(q[i], 1e-8));
            }
            REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-9));
        }
    }
}

TEST_CASE("coupling is invariant under consistent class permutation") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const size_t n = 5;
        const auto r = random_r(n, rng);
        const auto p = pairwise_couple(r);
        std::vector<size_t> perm = {3, 0, 4, 1, 2};
        std::vector<std::vector<double>> rp(n, std::vector<double>(n, 0.0));
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j)
                if (i != j) rp[perm[i]][perm[j]] = r[i][j];
        const auto pp = pairwise_couple(rp);
        for (size_t i = 0; i < n; ++i)
            REQUIRE_THAT(pp[perm[i]], Catch::Matchers::WithinAbs(p[i], 1e-10));
    }
}

TEST_CASE("coupling validates its input") {
    REQUIRE_THROWS_AS(pairwise_couple({{0.0}}), DataError);
    REQUIRE_THROWS_AS(pairwise_couple({{0.0, 0.5}, {0.6, 0.0}}), DataError); // rows don't pair up
    REQUIRE_THROWS_AS(pairwise_couple({{0.0, 1.0}, {0.0, 0.0}}), DataError); // outside (0,1)
    REQUIRE_THROWS_AS(pairwise_couple({{0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}}), DataError);
}
