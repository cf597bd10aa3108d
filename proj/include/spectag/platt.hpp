#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "spectag/errors.hpp"
#include "spectag/log.hpp"

namespace spectag {

// Sigmoid map from SVM decision values to pair probabilities:
// r = 1 / (1 + exp(slope_a * d + offset_b)). A negative slope orients r to
// grow with the decision value (the +1 class direction).
struct SigmoidCalibration {
    double slope_a = -1.0;
    double offset_b = 0.0;
    bool degenerate = false;

    double apply(double decision) const {
        const double t = slope_a * decision + offset_b;
        if (t >= 0.0) {
            const double e = std::exp(-t);
            return e / (1.0 + e);
        }
        return 1.0 / (1.0 + std::exp(t));
    }
};

// Regularized maximum-likelihood sigmoid fit with the smoothed targets
// t+ = (N+ + 1)/(N+ + 2), t- = 1/(N- + 2); Newton iterations with
// backtracking. Decision values should come from cross-fitting so the
// calibration is not optimistic.
inline SigmoidCalibration platt_fit(const std::vector<double>& decisions,
                                    const std::vector<int8_t>& labels) {
    if (decisions.size() != labels.size() || decisions.empty())
        throw DataError("platt_fit: decision/label count mismatch");
    int64_t n_pos = 0, n_neg = 0;
    for (int8_t y : labels) (y > 0 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0) throw DataError("platt_fit: both labels must be present");

    const auto [dmin, dmax] = std::minmax_element(decisions.begin(), decisions.end());
    if (*dmax - *dmin < 1e-12) {
        log::warn("platt_fit: all decision values equal; using fallback calibration");
        SigmoidCalibration fallback;
        fallback.degenerate = true;
        return fallback;
    }

    const size_t n = decisions.size();
    const double hi_target = (n_pos + 1.0) / (n_pos + 2.0);
    const double lo_target = 1.0 / (n_neg + 2.0);
    std::vector<double> target(n);
    for (size_t i = 0; i < n; ++i) target[i] = labels[i] > 0 ? hi_target : lo_target;

    double a = 0.0;
    double b = std::log((n_neg + 1.0) / (n_pos + 1.0));
    auto objective = [&](double aa, double bb) {
        double f = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double z = aa * decisions[i] + bb;
            if (z >= 0.0)
                f += target[i] * z + std::log1p(std::exp(-z));
            else
                f += (target[i] - 1.0) * z + std::log1p(std::exp(z));
        }
        return f;
    };
    double fval = objective(a, b);

    const int max_iters = 100;
    const double min_step = 1e-10;
    const double sigma_reg = 1e-12;
    for (int iter = 0; iter < max_iters; ++iter) {
        double h11 = sigma_reg, h22 = sigma_reg, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double z = a * decisions[i] + b;
            double p, q; // p = 1/(1+exp(z)) computed stably, q = 1 - p
            if (z >= 0.0) {
                const double e = std::exp(-z);
                p = e / (1.0 + e);
                q = 1.0 / (1.0 + e);
            } else {
                const double e = std::exp(z);
                p = 1.0 / (1.0 + e);
                q = e / (1.0 + e);
            }
            const double d2 = p * q;
            h11 += decisions[i] * decisions[i] * d2;
            h22 += d2;
            h21 += decisions[i] * d2;
            const double d1 = target[i] - p;
            g1 += decisions[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;

        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;
        double stepsize = 1.0;
        while (stepsize >= min_step) {
            const double a_new = a + stepsize * da;
            const double b_new = b + stepsize * db;
            const double f_new = objective(a_new, b_new);
            if (f_new < fval + 1e-4 * stepsize * gd) {
                a = a_new;
                b = b_new;
                fval = f_new;
                break;
            }
            stepsize /= 2.0;
        }
        if (stepsize < min_step) break;
    }

    SigmoidCalibration calib;
    calib.slope_a = a;
    calib.offset_b = b;
    if (!std::isfinite(a) || !std::isfinite(b))
        throw NumericError("platt_fit: non-finite sigmoid parameters");
    return calib;
}

} // namespace spectag
