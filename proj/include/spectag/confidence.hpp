#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "spectag/errors.hpp"

namespace spectag {

enum class ConfidenceMetric { kGini, kPpci, kMax };

inline std::string metric_name(ConfidenceMetric m) {
    switch (m) {
        case ConfidenceMetric::kGini: return "gc";
        case ConfidenceMetric::kPpci: return "ppci";
        case ConfidenceMetric::kMax: return "max";
    }
    return "gc";
}

inline ConfidenceMetric metric_from_name(const std::string& name) {
    if (name == "gc" || name == "gini") return ConfidenceMetric::kGini;
    if (name == "ppci") return ConfidenceMetric::kPpci;
    if (name == "max") return ConfidenceMetric::kMax;
    throw ConfigError("unknown confidence metric '" + name + "' (expected gc, ppci, or max)");
}

inline void check_probabilities(const std::vector<double>& p, const char* what) {
    if (p.size() < 2) throw DataError(std::string(what) + ": need at least 2 classes");
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) throw DataError(std::string(what) + ": probabilities must be >= 0");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw DataError(std::string(what) + ": probabilities must sum to 1");
}

// Shannon entropy normalized by log(J); zero terms contribute nothing.
inline double normalized_entropy(const std::vector<double>& p) {
    check_probabilities(p, "normalized_entropy");
    double e = 0.0;
    for (double v : p)
        if (v > 0.0) e -= v * std::log(v);
    e /= std::log(static_cast<double>(p.size()));
    return std::clamp(e, 0.0, 1.0);
}

// Posterior probability certainty index: 1 - normalized entropy.
inline double ppci(const std::vector<double>& p) { return 1.0 - normalized_entropy(p); }

// Gini coefficient of the class distribution. The Lorentz curve runs
// piecewise-linearly from (0,0) through (k/J, cumulative probability) with
// probabilities sorted descending; twice the area between the curve and the
// equality line, rescaled by J/(J-1) so the uniform distribution maps to 0
// and a one-hot distribution to 1.
inline double gini_coefficient(const std::vector<double>& p) {
    check_probabilities(p, "gini_coefficient");
    const size_t j_count = p.size();
    std::vector<double> sorted(p);
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double cum = 0.0;
    double integral = 0.0; // trapezoids of width 1/J
    for (double v : sorted) {
        const double prev = cum;
        cum += v;
        integral += 0.5 * (prev + cum);
    }
    integral /= static_cast<double>(j_count);
    const double raw = 2.0 * integral - 1.0;
    const double gc = raw * static_cast<double>(j_count) / static_cast<double>(j_count - 1);
    return std::clamp(gc, 0.0, 1.0);
}

inline double max_confidence(const std::vector<double>& p) {
    check_probabilities(p, "max_confidence");
    return *std::max_element(p.begin(), p.end());
}

inline double confidence_score(ConfidenceMetric metric, const std::vector<double>& p) {
    switch (metric) {
        case ConfidenceMetric::kGini: return gini_coefficient(p);
        case ConfidenceMetric::kPpci: return ppci(p);
        case ConfidenceMetric::kMax: return max_confidence(p);
    }
    return gini_coefficient(p);
}

struct ConfidenceThreshold {
    ConfidenceMetric metric = ConfidenceMetric::kGini;
    double tau = 0.9;
};

// Strict inequality: a score exactly at tau is not confident.
inline bool is_confident(const std::vector<double>& p, const ConfidenceThreshold& thr) {
    return confidence_score(thr.metric, p) > thr.tau;
}

inline bool is_confident_score(double score, double tau) { return score > tau; }

} // namespace spectag
