#pragma once

// Small dense kernels with fully pinned-down arithmetic order. The simulated
// factorization and its verification both build on these, so results are
// bit-reproducible across runs and rank counts.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace lux::dense {

struct Matrix {
    std::int64_t rows = 0, cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(std::int64_t r, std::int64_t c) : rows(r), cols(c), a(size_t(r * c), 0.0) {}

    double& at(std::int64_t i, std::int64_t j) { return a[size_t(i * cols + j)]; }
    double at(std::int64_t i, std::int64_t j) const { return a[size_t(i * cols + j)]; }
    double* row(std::int64_t i) { return a.data() + i * cols; }
    const double* row(std::int64_t i) const { return a.data() + i * cols; }
};

// splitmix64; the standard finalizer, used as a counter-based value source.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Deterministic matrix entry in [-1, 1), independent of traversal order.
inline double matrix_entry(std::uint64_t seed, std::int64_t i, std::int64_t j) {
    std::uint64_t h = mix64(mix64(seed ^ (std::uint64_t(i) << 32)) ^ std::uint64_t(j));
    return double(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

struct SingularMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Partial-pivoted right-looking elimination without physical row exchanges:
// rows stay in place and a chosen-row mask advances instead. `pivots` returns
// the chosen original row indices in elimination order. Ties break toward the
// smaller row index (strict comparison while scanning upward).
inline void lu_masked_partial_pivot(Matrix& A, std::vector<std::int64_t>& pivots) {
    const std::int64_t n = A.rows;
    if (A.cols != n) throw std::runtime_error("square matrix required");
    std::vector<char> chosen(n, 0);
    pivots.clear();
    for (std::int64_t k = 0; k < n; ++k) {
        std::int64_t piv = -1;
        double best = -1.0;
        for (std::int64_t i = 0; i < n; ++i) {
            if (chosen[i]) continue;
            double v = std::abs(A.at(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (piv < 0 || best < 1e-300)
            throw SingularMatrixError("singular pivot column " + std::to_string(k));
        chosen[piv] = 1;
        pivots.push_back(piv);
        const double d = A.at(piv, k);
        for (std::int64_t i = 0; i < n; ++i) {
            if (chosen[i]) continue;
            double l = A.at(i, k) / d;
            A.at(i, k) = l;
            const double* pr = A.row(piv);
            double* ir = A.row(i);
            for (std::int64_t j = k + 1; j < n; ++j) ir[j] -= l * pr[j];
        }
    }
}

// In-order (no pivoting) LU of a small block; diag of U must stay away from 0.
inline void lu_inorder(Matrix& A) {
    const std::int64_t n = A.rows;
    for (std::int64_t k = 0; k < n; ++k) {
        double d = A.at(k, k);
        if (std::abs(d) < 1e-300)
            throw SingularMatrixError("zero pivot in block factorization");
        for (std::int64_t i = k + 1; i < n; ++i) {
            double l = A.at(i, k) / d;
            A.at(i, k) = l;
            for (std::int64_t j = k + 1; j < n; ++j) A.at(i, j) -= l * A.at(k, j);
        }
    }
}

// row := row * U^{-1} for an upper-triangular U (packed with L in `lu`).
inline void solve_row_upper(const Matrix& lu, double* row) {
    const std::int64_t v = lu.rows;
    for (std::int64_t j = 0; j < v; ++j) {
        double s = row[j];
        for (std::int64_t k = 0; k < j; ++k) s -= row[k] * lu.at(k, j);
        row[j] = s / lu.at(j, j);
    }
}

// col := L^{-1} * col for the unit lower triangle packed in `lu`.
inline void solve_col_lower_unit(const Matrix& lu, double* col) {
    const std::int64_t v = lu.rows;
    for (std::int64_t i = 0; i < v; ++i) {
        double s = col[i];
        for (std::int64_t k = 0; k < i; ++k) s -= lu.at(i, k) * col[k];
        col[i] = s;
    }
}

inline double frobenius(const Matrix& A) {
    double s = 0.0;
    for (double v : A.a) s += v * v;
    return std::sqrt(s);
}

}  // namespace lux::dense
