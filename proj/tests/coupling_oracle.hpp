#pragma once

// Test-only dense linear-system oracle for pairwise coupling: the per-class
// balance equations with the last row replaced by the sum-to-one constraint,
// solved by Gauss elimination with partial pivoting.

#include <cmath>
#include <random>
#include <vector>

namespace coupling_oracle {

inline std::vector<double> solve(const std::vector<std::vector<double>>& r) {
    const size_t n = r.size();
    std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
    for (size_t i = 0; i + 1 < n; ++i) { // p_i * sum_j r[j][i] - sum_j r[i][j] p_j = 0
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            a[i][i] += r[j][i];
            a[i][j] -= r[i][j];
        }
    }
    for (size_t j = 0; j < n; ++j) a[n - 1][j] = 1.0;
    a[n - 1][n] = 1.0;
    for (size_t col = 0; col < n; ++col) {
        size_t pivot = col;
        for (size_t row = col + 1; row < n; ++row)
            if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
        std::swap(a[col], a[pivot]);
        for (size_t row = 0; row < n; ++row) {
            if (row == col || a[row][col] == 0.0) continue;
            const double f = a[row][col] / a[col][col];
            for (size_t k = col; k <= n; ++k) a[row][k] -= f * a[col][k];
        }
    }
    std::vector<double> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = a[i][n] / a[i][i];
    return p;
}

inline std::vector<std::vector<double>> random_r(size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.02, 0.98);
    std::vector<std::vector<double>> r(n, std::vector<double>(n, 0.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            r[i][j] = u(rng);
            r[j][i] = 1.0 - r[i][j];
        }
    return r;
}

} // namespace coupling_oracle
