#pragma once

#include <limits>
#include <string>
#include <vector>

#include "mvcan/matrix.hpp"

namespace mvcan {

/// Minimum-cost perfect assignment on a square cost matrix (shortest
/// augmenting path formulation, O(n³)). Returns row -> column.
inline std::vector<std::size_t> solve_assignment(const Matrix& cost) {
    if (cost.rows != cost.cols)
        throw ShapeError("solve_assignment: cost matrix must be square");
    const std::size_t n = cost.rows;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            std::size_t j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> row_to_col(n, 0);
    for (std::size_t j = 1; j <= n; ++j)
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

/// K×K permutation stored as row -> column mapping (entry [j, to_col[j]] = 1).
struct Permutation {
    std::vector<std::size_t> to_col;

    std::size_t size() const { return to_col.size(); }

    Matrix as_matrix() const {
        Matrix a(to_col.size(), to_col.size());
        for (std::size_t j = 0; j < to_col.size(); ++j) a(j, to_col[j]) = 1.0;
        return a;
    }

    static Permutation identity(std::size_t k) {
        Permutation p;
        p.to_col.resize(k);
        for (std::size_t j = 0; j < k; ++j) p.to_col[j] = j;
        return p;
    }

    bool is_identity() const {
        for (std::size_t j = 0; j < to_col.size(); ++j)
            if (to_col[j] != j) return false;
        return true;
    }
};

/// Column-matching cost: c[j][k] = Σ_i (t_ij - y_ik)², the price of
/// routing target column j to prediction column k.
inline Matrix column_match_cost(const Matrix& t, const Matrix& y) {
    require_same_shape(t, y, "column_match_cost");
    const std::size_t n = t.rows, k = t.cols;
    Matrix cost(k, k);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ti = t.row_ptr(i);
        const double* yi = y.row_ptr(i);
        for (std::size_t a = 0; a < k; ++a) {
            double* ca = cost.row_ptr(a);
            for (std::size_t b = 0; b < k; ++b) {
                const double d = ti[a] - yi[b];
                ca[b] += d * d;
            }
        }
    }
    return cost;
}

/// Permutation A minimizing ||T·A - Y||_F² over column permutations.
inline Permutation match_labels(const Matrix& t, const Matrix& y) {
    Permutation perm;
    perm.to_col = solve_assignment(column_match_cost(t, y));
    return perm;
}

/// T·A for a column permutation: column to_col[j] of the result is
/// column j of T.
inline Matrix apply_column_permutation(const Matrix& t, const Permutation& perm) {
    if (perm.size() != t.cols)
        throw ShapeError("apply_column_permutation: permutation size " +
                         std::to_string(perm.size()) + " vs " + std::to_string(t.cols) +
                         " columns");
    Matrix out(t.rows, t.cols);
    for (std::size_t i = 0; i < t.rows; ++i) {
        const double* ti = t.row_ptr(i);
        double* oi = out.row_ptr(i);
        for (std::size_t j = 0; j < t.cols; ++j) oi[perm.to_col[j]] = ti[j];
    }
    return out;
}

inline double assignment_cost(const Matrix& cost, const std::vector<std::size_t>& row_to_col) {
    double acc = 0.0;
    for (std::size_t i = 0; i < row_to_col.size(); ++i) acc += cost(i, row_to_col[i]);
    return acc;
}

}  // namespace mvcan
