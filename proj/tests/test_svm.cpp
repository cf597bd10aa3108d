#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "spectag/platt.hpp"
#include "spectag/svm.hpp"

#include "qp_oracle.hpp"

using namespace spectag;

namespace {

struct Blobs {
    std::vector<std::vector<double>> xs;
    std::vector<int8_t> ys;
};

Blobs gaussian_blobs(int per_class, double separation, uint64_t seed, double sigma = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, sigma);
    Blobs b;
    for (int k = 0; k < per_class; ++k) {
        b.xs.push_back({separation + n(rng), n(rng)});
        b.ys.push_back(1);
        b.xs.push_back({-separation + n(rng), n(rng)});
        b.ys.push_back(-1);
    }
    return b;
}

double training_accuracy(const BinarySvmModel& model, const Blobs& data) {
    int correct = 0;
    for (size_t k = 0; k < data.xs.size(); ++k) {
        const double d = model.decision(data.xs[k]);
        correct += (d > 0 ? 1 : -1) == data.ys[k];
    }
    return static_cast<double>(correct) / data.xs.size();
}

} // namespace

TEST_CASE("rbf kernel values") {
    const std::vector<double> a = {1.0, 2.0, 3.0};
    REQUIRE(rbf_kernel(a, a, 0.7) == 1.0);

    // ||x-x'||^2 = 1/gamma leads to exp(-1)
    const std::vector<double> b = {1.0 + std::sqrt(0.5), 2.0, 3.0};
    REQUIRE_THAT(rbf_kernel(a, b, 2.0), Catch::Matchers::WithinAbs(std::exp(-1.0), 1e-12));

    const std::vector<double> o = {0.0, 0.0};
    const std::vector<double> p = {3.0, 4.0};
    REQUIRE_THAT(rbf_kernel(o, p, 0.01), Catch::Matchers::WithinAbs(std::exp(-0.25), 1e-12));

    REQUIRE_THROWS_AS(rbf_kernel(a, o, 1.0), DataError);
    REQUIRE_THROWS_AS(rbf_kernel(a, a, 0.0), ConfigError);
}

TEST_CASE("standardizer centers and scales") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-3.0, 5.0);
    std::vector<std::vector<double>> rows(200, std::vector<double>(5));
    for (auto& r : rows) {
        for (int d = 0; d < 4; ++d) r[d] = u(rng);
        r[4] = 2.5; // constant dimension
    }
    Standardizer st;
    st.fit(rows);
    std::vector<double> mean(5, 0.0), var(5, 0.0);
    for (const auto& r : rows) {
        const auto z = st.apply(r);
        for (int d = 0; d < 5; ++d) mean[d] += z[d];
    }
    for (double& m : mean) m /= rows.size();
    for (const auto& r : rows) {
        const auto z = st.apply(r);
        for (int d = 0; d < 5; ++d) var[d] += (z[d] - mean[d]) * (z[d] - mean[d]);
    }
    for (int d = 0; d < 4; ++d) {
        REQUIRE(std::abs(mean[d]) < 1e-9);
        REQUIRE_THAT(std::sqrt(var[d] / rows.size()), Catch::Matchers::WithinAbs(1.0, 1e-6));
    }
    REQUIRE(st.stddev[4] == 1.0); // constant dimension passes through
    REQUIRE(std::abs(mean[4]) < 1e-12);
}

TEST_CASE("smo separates gaussian blobs perfectly") {
    const Blobs data = gaussian_blobs(100, 4.0, 7);
    const BinarySvmModel model = smo_train(data.xs, data.ys, 10.0, 1.0);
    REQUIRE(model.converged);
    REQUIRE(training_accuracy(model, data) == 1.0);
}

TEST_CASE("smo solutions satisfy dual feasibility") {
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const Blobs data = gaussian_blobs(40, 1.0, seed, 1.5); // overlapping
        const double c_box = 10.0;
        std::vector<double> kmat_flat;
        const SmoSolution sol = [&] {
            const int n = static_cast<int>(data.xs.size());
            kmat_flat.resize(static_cast<size_t>(n) * n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    kmat_flat[static_cast<size_t>(i) * n + j] =
                        rbf_kernel(data.xs[i], data.xs[j], 1.0);
            auto kernel = [&](int i, int j) {
                return kmat_flat[static_cast<size_t>(i) * data.xs.size() + j];
            };
            return smo_solve(kernel, data.ys, c_box, {});
        }();
        double balance = 0.0;
        for (size_t k = 0; k < sol.alpha.size(); ++k) {
            REQUIRE(sol.alpha[k] >= 0.0);
            REQUIRE(sol.alpha[k] <= c_box);
            balance += sol.alpha[k] * data.ys[k];
        }
        REQUIRE(std::abs(balance) < 1e-6);
    }
}

TEST_CASE("smo classifies the 4-point XOR set with an RBF kernel") {
    const std::vector<std::vector<double>> xs = {{0, 0}, {1, 1}, {0, 1}, {1, 0}};
    const std::vector<int8_t> ys = {1, 1, -1, -1};
    const BinarySvmModel model = smo_train(xs, ys, 100.0, 1.0);
    for (size_t k = 0; k < xs.size(); ++k) {
        const double d = model.decision(xs[k]);
        REQUIRE((d > 0 ? 1 : -1) == ys[k]);
    }
}

TEST_CASE("smo errors") {
    const std::vector<std::vector<double>> xs = {{0, 0}, {1, 1}};
    REQUIRE_THROWS_AS(smo_train(xs, {1, 1}, 1.0, 1.0), DataError);
    REQUIRE_THROWS_AS(smo_train(xs, {1, -1}, -1.0, 1.0), ConfigError);
}

TEST_CASE("smo matches the brute-force QP oracle on small problems") {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> coin(0, 1);
    for (int trial = 0; trial < 6; ++trial) {
        const int count = 12 + 4 * trial; // up to 32 points
        std::vector<std::vector<double>> xs(count, std::vector<double>(3));
        std::vector<int8_t> ys(count);
        int balancepos = 0;
        for (int k = 0; k < count; ++k) {
            ys[k] = coin(rng) ? 1 : -1;
            balancepos += ys[k] > 0;
            for (double& v : xs[k]) v = n(rng) + (ys[k] > 0 ? 0.7 : -0.7);
        }
        if (balancepos == 0) ys[0] = 1;
        if (balancepos == count) ys[0] = -1;
        const double c_box = trial % 2 ? 5.0 : 50.0;
        const double gamma = trial % 3 ? 0.5 : 2.0;

        std::vector<std::vector<double>> kernel(count, std::vector<double>(count));
        for (int i = 0; i < count; ++i)
            for (int j = 0; j < count; ++j) kernel[i][j] = rbf_kernel(xs[i], xs[j], gamma);

        SmoOptions opts;
        opts.tol = 1e-6;
        auto kfn = [&](int i, int j) { return kernel[i][j]; };
        const SmoSolution sol = smo_solve(kfn, ys, c_box, opts);
        const std::vector<double> oracle = qp_oracle::solve(kernel, ys, c_box);
        const double w_smo = qp_oracle::dual_objective(sol.alpha, ys, kernel);
        const double w_oracle = qp_oracle::dual_objective(oracle, ys, kernel);
        REQUIRE(std::abs(w_smo - w_oracle) / std::max(1.0, std::abs(w_oracle)) < 1e-4);
    }
}

TEST_CASE("decision function equals an independent kernel expansion") {
    const Blobs data = gaussian_blobs(30, 2.0, 13);
    const BinarySvmModel model = smo_train(data.xs, data.ys, 10.0, 0.5);
    for (size_t k = 0; k < data.xs.size(); ++k) {
        double expansion = model.bias;
        for (size_t s = 0; s < model.support_vectors.size(); ++s) {
            double d2 = 0.0;
            for (size_t d = 0; d < 2; ++d) {
                const double diff = data.xs[k][d] - model.support_vectors[s][d];
                d2 += diff * diff;
            }
            expansion += model.alpha_y[s] * std::exp(-0.5 * d2);
        }
        REQUIRE_THAT(model.decision(data.xs[k]),
                     Catch::Matchers::WithinAbs(expansion, 1e-9));
    }
}

TEST_CASE("platt_fit orientation and symmetry") {
    SECTION("correctly ordered decisions give a negative slope and rising r") {
        std::vector<double> d;
        std::vector<int8_t> y;
        std::mt19937_64 rng(3);
        std::normal_distribution<double> n(0.0, 0.3);
        for (int k = 0; k < 200; ++k) {
            const int8_t label = k % 2 ? 1 : -1;
            d.push_back(label * 1.5 + n(rng));
            y.push_back(label);
        }
        const SigmoidCalibration cal = platt_fit(d, y);
        REQUIRE_FALSE(cal.degenerate);
        REQUIRE(cal.slope_a < 0.0);
        REQUIRE(cal.apply(2.0) > cal.apply(0.0));
        REQUIRE(cal.apply(0.0) > cal.apply(-2.0));
        REQUIRE(cal.apply(3.0) > 0.8);
        REQUIRE(cal.apply(-3.0) < 0.2);
    }
    SECTION("symmetric data gives offset near zero") {
        std::vector<double> d;
        std::vector<int8_t> y;
        for (int k = 1; k <= 50; ++k) {
            const double v = 0.05 * k;
            d.push_back(v);
            y.push_back(1);
            d.push_back(-v);
            y.push_back(-1);
        }
        const SigmoidCalibration cal = platt_fit(d, y);
        REQUIRE(std::abs(cal.offset_b) < 1e-3);
    }
    SECTION("degenerate input falls back with a warning") {
        const std::vector<double> d(10, 0.25);
        std::vector<int8_t> y(10, 1);
        for (int k = 0; k < 5; ++k) y[k] = -1;
        const SigmoidCalibration cal = platt_fit(d, y);
        REQUIRE(cal.degenerate);
        REQUIRE(cal.slope_a == -1.0);
        REQUIRE(cal.offset_b == 0.0);
    }
    SECTION("single-class labels fail") {
        REQUIRE_THROWS_AS(platt_fit({0.1, 0.2}, {1, 1}), DataError);
    }
}
