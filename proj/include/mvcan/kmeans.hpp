#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mvcan/matrix.hpp"
#include "mvcan/random.hpp"

namespace mvcan {

struct KmeansResult {
    Matrix centroids;        // K×d
    std::vector<int> labels; // nearest centroid per row, ties to lowest index
    double objective = 0.0;  // Σ_i min_j ||z_i - c_j||²
    std::size_t iterations = 0;
};

namespace detail {

inline std::size_t nearest_centroid(const double* z, const Matrix& centroids,
                                    double* best_dist = nullptr) {
    std::size_t best = 0;
    double bd = squared_norm_row_diff(z, centroids.row_ptr(0), centroids.cols);
    for (std::size_t j = 1; j < centroids.rows; ++j) {
        const double d = squared_norm_row_diff(z, centroids.row_ptr(j), centroids.cols);
        if (d < bd) {
            bd = d;
            best = j;
        }
    }
    if (best_dist) *best_dist = bd;
    return best;
}

/// k-means++ seeding: first centroid uniform, the rest D²-weighted.
inline Matrix kmeanspp_seed(const Matrix& z, std::size_t k, Rng& rng) {
    const std::size_t n = z.rows, d = z.cols;
    Matrix centroids(k, d);
    std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
    std::size_t first = uniform_index(rng, n);
    for (std::size_t j = 0; j < d; ++j) centroids(0, j) = z(first, j);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dd =
                squared_norm_row_diff(z.row_ptr(i), centroids.row_ptr(c - 1), d);
            if (dd < dist2[i]) dist2[i] = dd;
            total += dist2[i];
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = uniform_index(rng, n);  // all points coincide with a centroid
        } else {
            const double target = uniform01(rng) * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        }
        for (std::size_t j = 0; j < d; ++j) centroids(c, j) = z(pick, j);
    }
    return centroids;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed
/// seed. Empty clusters are repaired by seizing the point farthest from
/// its assigned centroid.
inline KmeansResult kmeans(const Matrix& z, std::size_t k, std::uint64_t seed,
                           std::size_t max_iterations = 300, double shift_tol = 1e-6) {
    if (z.rows == 0) throw std::invalid_argument("kmeans: empty input");
    if (k < 1) throw std::invalid_argument("kmeans: need k >= 1");
    if (z.rows < k)
        throw std::invalid_argument("kmeans: " + std::to_string(z.rows) + " samples < k=" +
                                    std::to_string(k));
    const std::size_t n = z.rows, d = z.cols;
    Rng rng(seed);
    KmeansResult res;
    res.centroids = detail::kmeanspp_seed(z, k, rng);
    res.labels.assign(n, 0);

    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        res.iterations = iter + 1;
        // Assignment step.
        for (std::size_t i = 0; i < n; ++i)
            res.labels[i] = static_cast<int>(detail::nearest_centroid(z.row_ptr(i), res.centroids));
        // Update step.
        sums.resize(k, d);
        counts.assign(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            double* s = sums.row_ptr(res.labels[i]);
            const double* zi = z.row_ptr(i);
            for (std::size_t j = 0; j < d; ++j) s[j] += zi[j];
            counts[res.labels[i]]++;
        }
        // Empty-cluster repair: take the point farthest from its centroid.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t worst = 0;
            double worst_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[res.labels[i]] <= 1) continue;  // keep donor nonempty
                const double dd = squared_norm_row_diff(
                    z.row_ptr(i), res.centroids.row_ptr(res.labels[i]), d);
                if (dd > worst_d) {
                    worst_d = dd;
                    worst = i;
                }
            }
            const int old = res.labels[worst];
            double* so = sums.row_ptr(old);
            double* sc = sums.row_ptr(c);
            const double* zi = z.row_ptr(worst);
            for (std::size_t j = 0; j < d; ++j) {
                so[j] -= zi[j];
                sc[j] += zi[j];
            }
            counts[old]--;
            counts[c] = 1;
            res.labels[worst] = static_cast<int>(c);
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            double* s = sums.row_ptr(c);
            double* cc = res.centroids.row_ptr(c);
            for (std::size_t j = 0; j < d; ++j) {
                const double next = s[j] / static_cast<double>(counts[c]);
                const double delta = next - cc[j];
                shift += delta * delta;
                cc[j] = next;
            }
        }
        if (std::sqrt(shift) < shift_tol) break;
    }
    // Final assignment against the converged centroids.
    res.objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dd = 0.0;
        res.labels[i] = static_cast<int>(detail::nearest_centroid(z.row_ptr(i), res.centroids, &dd));
        res.objective += dd;
    }
    return res;
}

/// Best of `restarts` independent seeded runs (strictly lower objective
/// wins; ties keep the earlier restart). A single k-means++ run can land
/// in a poor local minimum; restarts are the standard remedy.
inline KmeansResult kmeans_restarted(const Matrix& z, std::size_t k, std::uint64_t seed,
                                     std::size_t restarts,
                                     std::size_t max_iterations = 300,
                                     double shift_tol = 1e-6) {
    if (restarts < 1) throw std::invalid_argument("kmeans_restarted: need restarts >= 1");
    KmeansResult best;
    for (std::size_t r = 0; r < restarts; ++r) {
        KmeansResult run =
            kmeans(z, k, derive_seed(seed, 0x6b72, r), max_iterations, shift_tol);
        if (r == 0 || run.objective < best.objective) best = std::move(run);
    }
    return best;
}

}  // namespace mvcan
