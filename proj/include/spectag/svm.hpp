#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "spectag/errors.hpp"

namespace spectag {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        d += diff * diff;
    }
    return d;
}

// RBF kernel exp(-gamma * ||x - x'||^2).
inline double rbf_kernel(std::span<const double> x, std::span<const double> xp, double gamma) {
    if (x.size() != xp.size()) throw DataError("rbf_kernel: vector lengths differ");
    if (!(gamma > 0.0)) throw ConfigError("rbf_kernel: gamma must be positive");
    return std::exp(-gamma * squared_distance(x, xp));
}

// Per-dimension training mean/std; dimensions with std below 1e-12 keep
// std 1 so constant features pass through unchanged.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    void fit(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) throw DataError("Standardizer: empty training matrix");
        const size_t dim = rows[0].size();
        mean.assign(dim, 0.0);
        stddev.assign(dim, 0.0);
        for (const auto& r : rows) {
            if (r.size() != dim) throw DataError("Standardizer: ragged training matrix");
            for (size_t d = 0; d < dim; ++d) mean[d] += r[d];
        }
        for (double& m : mean) m /= static_cast<double>(rows.size());
        for (const auto& r : rows)
            for (size_t d = 0; d < dim; ++d) {
                const double diff = r[d] - mean[d];
                stddev[d] += diff * diff;
            }
        for (double& s : stddev) {
            s = std::sqrt(s / static_cast<double>(rows.size()));
            if (s < 1e-12) s = 1.0;
        }
    }

    size_t dim() const { return mean.size(); }

    std::vector<double> apply(std::span<const double> x) const {
        if (x.size() != mean.size())
            throw DataError("Standardizer: feature length " + std::to_string(x.size()) +
                            " does not match fitted dimension " + std::to_string(mean.size()));
        std::vector<double> out(x.size());
        for (size_t d = 0; d < x.size(); ++d) out[d] = (x[d] - mean[d]) / stddev[d];
        return out;
    }
};

// One binary RBF-SVM: decision(x) = sum_k alpha_y_k K(x, sv_k) + bias.
struct BinarySvmModel {
    std::vector<std::vector<double>> support_vectors; // standardized feature space
    std::vector<double> alpha_y;                      // a*_k * y_k
    double bias = 0.0;
    double gamma = 0.0;
    double box_c = 0.0;
    int class_pos = -1; // label +1 side of the pair
    int class_neg = -1;
    bool converged = true;
    double final_violation = 0.0;
    int64_t iterations = 0;

    double decision(std::span<const double> x) const {
        double d = bias;
        for (size_t k = 0; k < support_vectors.size(); ++k)
            d += alpha_y[k] * rbf_kernel(x, support_vectors[k], gamma);
        return d;
    }
};

struct SmoOptions {
    double tol = 1e-3;        // KKT violation threshold on max - min
    int64_t max_steps = -1;   // -1: max(10 * N_t, 50000)
    bool throw_on_max = true; // otherwise return the capped iterate
};

struct SmoSolution {
    std::vector<double> alpha;
    double bias = 0.0;
    bool converged = true;
    double final_violation = 0.0;
    int64_t iterations = 0;
};

// Sequential minimal optimization on the dual with maximal-violating-pair
// working set selection. `kernel(i, j)` must be symmetric positive
// semidefinite over the sample indices.
template <typename KernelFn>
SmoSolution smo_solve(const KernelFn& kernel, const std::vector<int8_t>& y, double c_box,
                      const SmoOptions& opts = {}) {
    const int n = static_cast<int>(y.size());
    if (n < 2) throw DataError("smo_solve: need at least two samples");
    if (!(c_box > 0.0)) throw ConfigError("smo_solve: C must be positive");
    bool has_pos = false, has_neg = false;
    for (int8_t v : y) (v > 0 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw DataError("smo_solve: both classes must be present");

    SmoSolution sol;
    sol.alpha.assign(n, 0.0);
    std::vector<double> grad(n, -1.0); // gradient of 1/2 a'Qa - e'a at a = 0
    std::vector<double> qdiag(n);
    for (int i = 0; i < n; ++i) qdiag[i] = kernel(i, i);

    const int64_t max_steps =
        opts.max_steps > 0 ? opts.max_steps : std::max<int64_t>(10LL * n, 50000);

    double m_up = 0.0, m_low = 0.0;
    int64_t step = 0;
    for (; step < max_steps; ++step) {
        int i = -1, j = -1;
        m_up = -std::numeric_limits<double>::infinity();
        m_low = std::numeric_limits<double>::infinity();
        for (int k = 0; k < n; ++k) {
            const double v = -y[k] * grad[k];
            const bool in_up = (y[k] > 0 && sol.alpha[k] < c_box) || (y[k] < 0 && sol.alpha[k] > 0);
            const bool in_low = (y[k] < 0 && sol.alpha[k] < c_box) || (y[k] > 0 && sol.alpha[k] > 0);
            if (in_up && v > m_up) {
                m_up = v;
                i = k;
            }
            if (in_low && v < m_low) {
                m_low = v;
                j = k;
            }
        }
        if (i < 0 || j < 0 || m_up - m_low < opts.tol) break;

        const double k_ij = kernel(i, j);
        double eta = qdiag[i] + qdiag[j] - 2.0 * k_ij;
        if (eta < 1e-12) eta = 1e-12;
        // move along a_i += y_i t, a_j -= y_j t (keeps sum a_k y_k fixed)
        double t = (m_up - m_low) / eta;
        t = std::min(t, y[i] > 0 ? c_box - sol.alpha[i] : sol.alpha[i]);
        t = std::min(t, y[j] > 0 ? sol.alpha[j] : c_box - sol.alpha[j]);
        sol.alpha[i] += y[i] > 0 ? t : -t;
        sol.alpha[j] -= y[j] > 0 ? t : -t;
        sol.alpha[i] = std::clamp(sol.alpha[i], 0.0, c_box);
        sol.alpha[j] = std::clamp(sol.alpha[j], 0.0, c_box);
        for (int k = 0; k < n; ++k) grad[k] += y[k] * t * (kernel(k, i) - kernel(k, j));
    }
    sol.iterations = step;
    sol.final_violation = std::max(0.0, m_up - m_low);
    sol.converged = sol.final_violation < opts.tol;
    if (!sol.converged && opts.throw_on_max)
        throw NumericError("smo_solve: no convergence after " + std::to_string(max_steps) +
                           " steps (KKT violation " + std::to_string(sol.final_violation) + ")");

    // bias from free support vectors, else from the violation midpoint
    double b_sum = 0.0;
    int b_count = 0;
    const double eps = 1e-12 * std::max(1.0, c_box);
    for (int k = 0; k < n; ++k)
        if (sol.alpha[k] > eps && sol.alpha[k] < c_box - eps) {
            b_sum += -y[k] * grad[k];
            ++b_count;
        }
    sol.bias = b_count > 0 ? b_sum / b_count : 0.5 * (m_up + m_low);
    return sol;
}

// Trains a binary model from raw (already standardized) vectors.
inline BinarySvmModel smo_train(const std::vector<std::vector<double>>& xs,
                                const std::vector<int8_t>& ys, double c_box, double gamma,
                                const SmoOptions& opts = {}) {
    if (xs.size() != ys.size()) throw DataError("smo_train: sample/label count mismatch");
    if (!(gamma > 0.0)) throw ConfigError("smo_train: gamma must be positive");
    const int n = static_cast<int>(xs.size());

    // dense kernel cache; training sets here are small enough to hold it
    std::vector<double> kmat(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        kmat[static_cast<size_t>(i) * n + i] = 1.0;
        for (int j = i + 1; j < n; ++j) {
            const double k = std::exp(-gamma * squared_distance(xs[i], xs[j]));
            kmat[static_cast<size_t>(i) * n + j] = k;
            kmat[static_cast<size_t>(j) * n + i] = k;
        }
    }
    auto kernel = [&](int i, int j) { return kmat[static_cast<size_t>(i) * n + j]; };
    const SmoSolution sol = smo_solve(kernel, ys, c_box, opts);

    BinarySvmModel model;
    model.gamma = gamma;
    model.box_c = c_box;
    model.bias = sol.bias;
    model.converged = sol.converged;
    model.final_violation = sol.final_violation;
    model.iterations = sol.iterations;
    const double eps = 1e-12 * std::max(1.0, c_box);
    for (int k = 0; k < n; ++k)
        if (sol.alpha[k] > eps) {
            model.support_vectors.push_back(xs[k]);
            model.alpha_y.push_back(sol.alpha[k] * ys[k]);
        }
    return model;
}

} // namespace spectag
