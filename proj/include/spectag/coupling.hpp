#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spectag/errors.hpp"

namespace spectag {

constexpr double kCouplingTolerance = 1e-10;
constexpr int kCouplingMaxIterations = 1000;

// Couples pairwise class probabilities r (r[i][j] favors class i within the
// pair {i,j}, r[i][j] + r[j][i] = 1) into a single J-class distribution: the
// unique p with sum 1, p >= 0 satisfying the per-class balance
//   p_i * sum_{j != i} r[j][i]  =  sum_{j != i} r[i][j] * p_j.
// Solved by the normalized Gauss-Seidel fixed point of the pairwise
// comparison method.
inline std::vector<double> pairwise_couple(const std::vector<std::vector<double>>& r) {
    const size_t j_count = r.size();
    if (j_count < 2) throw DataError("pairwise_couple: need at least 2 classes");
    for (size_t i = 0; i < j_count; ++i) {
        if (r[i].size() != j_count) throw DataError("pairwise_couple: matrix must be square");
        for (size_t j = 0; j < j_count; ++j) {
            if (i == j) continue;
            if (!(r[i][j] > 0.0) || !(r[i][j] < 1.0))
                throw DataError("pairwise_couple: off-diagonal entries must lie in (0,1)");
            if (std::abs(r[i][j] + r[j][i] - 1.0) > 1e-9)
                throw DataError("pairwise_couple: r[i][j] + r[j][i] must equal 1");
        }
    }

    std::vector<double> denom(j_count, 0.0);
    for (size_t i = 0; i < j_count; ++i)
        for (size_t j = 0; j < j_count; ++j)
            if (j != i) denom[i] += r[j][i];

    std::vector<double> p(j_count, 1.0 / static_cast<double>(j_count));
    std::vector<double> prev(j_count);
    for (int iter = 0; iter < kCouplingMaxIterations; ++iter) {
        prev = p;
        for (size_t i = 0; i < j_count; ++i) {
            double numer = 0.0;
            for (size_t j = 0; j < j_count; ++j)
                if (j != i) numer += r[i][j] * p[j];
            p[i] = numer / denom[i];
            double sum = 0.0;
            for (double v : p) sum += v;
            for (double& v : p) v /= sum;
        }
        double delta = 0.0;
        for (size_t i = 0; i < j_count; ++i) delta = std::max(delta, std::abs(p[i] - prev[i]));
        if (delta < kCouplingTolerance) {
            double sum = 0.0;
            for (double v : p) sum += v;
            for (double& v : p) v /= sum;
            return p;
        }
    }
    throw NumericError("pairwise_couple: no convergence after " +
                       std::to_string(kCouplingMaxIterations) + " iterations");
}

} // namespace spectag
