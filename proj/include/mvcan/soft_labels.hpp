#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mvcan/matrix.hpp"

namespace mvcan {

/// Soft assignment of each row of `z` against `centroids` (K×d) using the
/// similarity kernel s = 1/(1+||z-mu||²), normalized per row. Entries are
/// in (0,1] before normalization and rows sum to 1 after it.
inline Matrix soft_assign(const Matrix& z, const Matrix& centroids) {
    if (centroids.rows < 2) throw ShapeError("soft_assign: need at least 2 centroids");
    if (z.cols != centroids.cols)
        throw ShapeError("soft_assign: representation width " + std::to_string(z.cols) +
                         " vs centroid width " + std::to_string(centroids.cols));
    const std::size_t n = z.rows, k = centroids.rows;
    Matrix y(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        const double* zi = z.row_ptr(i);
        double* yi = y.row_ptr(i);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double d2 = squared_norm_row_diff(zi, centroids.row_ptr(j), z.cols);
            yi[j] = 1.0 / (1.0 + d2);
            sum += yi[j];
        }
        for (std::size_t j = 0; j < k; ++j) yi[j] /= sum;
    }
    return y;
}

/// Sharpened learning target: t_ij ∝ y_ij² / f_j with column mass
/// f_j = Σ_i y_ij, renormalized per row. Enhances confident entries.
inline Matrix sharpen_target(const Matrix& y) {
    const std::size_t n = y.rows, k = y.cols;
    std::vector<double> f(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* yi = y.row_ptr(i);
        for (std::size_t j = 0; j < k; ++j) f[j] += yi[j];
    }
    for (std::size_t j = 0; j < k; ++j)
        if (f[j] == 0.0)
            throw std::runtime_error("sharpen_target: cluster " + std::to_string(j) +
                                     " has zero mass");
    Matrix t(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        const double* yi = y.row_ptr(i);
        double* ti = t.row_ptr(i);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            ti[j] = yi[j] * yi[j] / f[j];
            sum += ti[j];
        }
        for (std::size_t j = 0; j < k; ++j) ti[j] /= sum;
    }
    return t;
}

/// Row argmax; ties broken toward the lowest cluster index.
inline std::vector<int> argmax_labels(const Matrix& y) {
    std::vector<int> labels(y.rows, 0);
    for (std::size_t i = 0; i < y.rows; ++i) {
        const double* yi = y.row_ptr(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < y.cols; ++j)
            if (yi[j] > yi[best]) best = j;
        labels[i] = static_cast<int>(best);
    }
    return labels;
}

/// dL/dZ and dL/dCentroids for L = ||soft_assign(z, mu) - p||_F², given
/// the already-computed assignment y. Gradients are accumulated into the
/// (pre-sized) outputs scaled by `scale`.
inline void soft_assign_backward(const Matrix& z, const Matrix& centroids, const Matrix& y,
                                 const Matrix& p, double scale, Matrix& dz, Matrix& dmu) {
    require_same_shape(y, p, "soft_assign_backward");
    const std::size_t n = z.rows, k = centroids.rows, d = z.cols;
    if (dz.rows != n || dz.cols != d) dz.resize(n, d);
    if (dmu.rows != k || dmu.cols != d) dmu.resize(k, d);
    std::vector<double> gd(k);  // dL/d distance² per cluster, one row at a time
    for (std::size_t i = 0; i < n; ++i) {
        const double* zi = z.row_ptr(i);
        const double* yi = y.row_ptr(i);
        const double* pi = p.row_ptr(i);
        // Row similarity mass S_i: recover from y and the distances.
        // y_ij = s_ij / S_i and s_ij = 1/(1+d²); recompute s for stability.
        double srow = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double d2 = squared_norm_row_diff(zi, centroids.row_ptr(j), d);
            gd[j] = 1.0 / (1.0 + d2);  // stash s_ij
            srow += gd[j];
        }
        double gdoty = 0.0;
        for (std::size_t j = 0; j < k; ++j) gdoty += 2.0 * (yi[j] - pi[j]) * yi[j];
        for (std::size_t j = 0; j < k; ++j) {
            const double s = gd[j];
            const double dLds = (2.0 * (yi[j] - pi[j]) - gdoty) / srow;
            gd[j] = -dLds * s * s;  // chain through s = 1/(1+d²)
        }
        double* dzi = dz.row_ptr(i);
        for (std::size_t j = 0; j < k; ++j) {
            const double* mj = centroids.row_ptr(j);
            double* dmj = dmu.row_ptr(j);
            const double c = scale * 2.0 * gd[j];
            for (std::size_t a = 0; a < d; ++a) {
                const double diff = zi[a] - mj[a];
                dzi[a] += c * diff;
                dmj[a] -= c * diff;
            }
        }
    }
}

}  // namespace mvcan
