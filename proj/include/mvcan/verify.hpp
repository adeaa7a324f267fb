#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvcan/hungarian.hpp"
#include "mvcan/matrix.hpp"
#include "mvcan/metrics.hpp"
#include "mvcan/random.hpp"

namespace mvcan {

struct VerifyOptions {
    double epsilon = 1e-6;  // max pairwise distance gap inside a noisy profile
    double margin = 1.0;    // min pairwise distance gap inside an informative profile
    bool flip_fused_sign = false;  // fault injection for harness self-tests

    void validate() const {
        if (epsilon <= 0.0) throw std::invalid_argument("verify: epsilon must be positive");
        if (margin <= 0.0) throw std::invalid_argument("verify: margin must be positive");
        if (epsilon * 100.0 > margin)
            throw std::invalid_argument(
                "verify: epsilon must be small against the informative margin "
                "(epsilon*100 <= margin); a large epsilon is not a noisy profile");
    }
};

struct TheoremReport {
    int theorem = 0;
    std::string name;
    std::size_t trials = 0;
    std::size_t satisfied = 0;
    std::vector<std::string> counterexamples;  // first few, serialized for replay

    bool passed() const { return trials > 0 && satisfied == trials; }
};

namespace verify_detail {

constexpr std::size_t kMaxStoredCounterexamples = 3;

inline void record_failure(TheoremReport& report, const nlohmann::json& payload) {
    if (report.counterexamples.size() < kMaxStoredCounterexamples)
        report.counterexamples.push_back(payload.dump());
}

/// One sample observed through several views: per-view centroids (K×d_v)
/// and the per-view representation of the sample.
struct FusedWitness {
    std::vector<Matrix> centroids;
    std::vector<std::vector<double>> point;
    std::vector<double> weights;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["weights"] = weights;
        for (std::size_t v = 0; v < centroids.size(); ++v) {
            nlohmann::json vj;
            vj["point"] = point[v];
            for (std::size_t c = 0; c < centroids[v].rows; ++c)
                vj["centroids"].push_back(std::vector<double>(
                    centroids[v].row_ptr(c), centroids[v].row_ptr(c) + centroids[v].cols));
            j["views"].push_back(vj);
        }
        return j;
    }
};

/// Nearest fused centroid under the scaled-concatenation construction
/// c_j = [w^1 mu_j^1 ... w^V mu_j^V], ties to the lowest index.
inline std::size_t fused_nearest(const FusedWitness& w, bool flip_sign) {
    const std::size_t k = w.centroids.front().rows;
    std::size_t best = 0;
    double best_val = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        double dist = 0.0;
        for (std::size_t v = 0; v < w.centroids.size(); ++v) {
            const double wv = w.weights[v];
            const double* mu = w.centroids[v].row_ptr(j);
            for (std::size_t a = 0; a < w.centroids[v].cols; ++a) {
                const double diff = wv * w.point[v][a] - wv * mu[a];
                dist += diff * diff;
            }
        }
        if (flip_sign) dist = -dist;
        if (j == 0 || dist < best_val) {
            best_val = dist;
            best = j;
        }
    }
    return best;
}

/// Places centroids around an origin-centered sample so that the squared
/// distance to centroid j is exactly dists[j] (random directions).
inline void place_view(FusedWitness& w, const std::vector<double>& dists, std::size_t dim,
                       Rng& rng) {
    const std::size_t k = dists.size();
    Matrix centroids(k, dim);
    for (std::size_t j = 0; j < k; ++j) {
        double norm2 = 0.0;
        std::vector<double> dir(dim);
        for (std::size_t a = 0; a < dim; ++a) {
            dir[a] = gaussian(rng);
            norm2 += dir[a] * dir[a];
        }
        const double scale = std::sqrt(dists[j]) / std::sqrt(norm2);
        for (std::size_t a = 0; a < dim; ++a) centroids(j, a) = dir[a] * scale;
    }
    w.centroids.push_back(std::move(centroids));
    w.point.emplace_back(dim, 0.0);
}

/// Distance profile with all pairwise gaps >= margin and the smallest
/// value at cluster `nearest`.
inline std::vector<double> informative_profile(std::size_t k, std::size_t nearest,
                                               double margin, Rng& rng) {
    std::vector<double> levels(k);
    double acc = uniform_range(rng, 0.0, 2.0);
    for (std::size_t r = 0; r < k; ++r) {
        levels[r] = acc;
        acc += uniform_range(rng, margin, margin + 2.0);
    }
    // Rank 0 goes to `nearest`; the rest are shuffled over the others.
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < k; ++j)
        if (j != nearest) others.push_back(j);
    shuffle_in_place(others, rng);
    std::vector<double> dists(k, 0.0);
    dists[nearest] = levels[0];
    for (std::size_t r = 0; r < others.size(); ++r) dists[others[r]] = levels[r + 1];
    return dists;
}

/// Distance profile with all pairwise gaps < epsilon (a noisy view).
inline std::vector<double> noisy_profile(std::size_t k, double epsilon, Rng& rng) {
    std::vector<double> dists(k);
    const double base = uniform_range(rng, 0.5, 3.0);
    for (std::size_t j = 0; j < k; ++j)
        dists[j] = base + uniform_range(rng, 0.0, 0.45 * epsilon);
    return dists;
}

inline Matrix random_soft_labels(std::size_t n, std::size_t k, Rng& rng) {
    Matrix y(n, k);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        double* yi = y.row_ptr(i);
        for (std::size_t j = 0; j < k; ++j) {
            yi[j] = uniform_range(rng, 1e-3, 1.0);
            sum += yi[j];
        }
        for (std::size_t j = 0; j < k; ++j) yi[j] /= sum;
    }
    return y;
}

inline Matrix one_hot(const std::vector<int>& labels, std::size_t k) {
    Matrix m(labels.size(), k);
    for (std::size_t i = 0; i < labels.size(); ++i) m(i, labels[i]) = 1.0;
    return m;
}

}  // namespace verify_detail

/// Checks the accuracy identity ACC = 1 - ||Y_check - T||_F²/(2N) against
/// a direct optimal-matching count on one-hot targets, and that the
/// worst-view upper bound on ACC is never undercut.
inline TheoremReport verify_accuracy_identity(std::size_t trials, std::uint64_t seed,
                                              const VerifyOptions& opts = {}) {
    opts.validate();
    TheoremReport report{1, "accuracy identity and worst-view bound", trials, 0, {}};
    Rng rng(derive_seed(seed, 0x7101));
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t k = 2 + uniform_index(rng, 5);           // 2..6
        const std::size_t n = k + uniform_index(rng, 51 - k);      // k..50
        std::vector<int> truth(n), target_labels(n);
        for (auto& x : truth) x = static_cast<int>(uniform_index(rng, k));
        for (auto& x : target_labels) x = static_cast<int>(uniform_index(rng, k));

        // Relabel the truth to maximally match the target (assignment on
        // the contingency table), then build the one-hot pair.
        const auto table = contingency_table(truth, target_labels);
        Matrix cost(k, k);
        for (std::size_t a = 0; a < table.size(); ++a)
            for (std::size_t b = 0; b < table[a].size(); ++b)
                cost(a, b) = -static_cast<double>(table[a][b]);
        const auto perm = solve_assignment(cost);
        std::vector<int> relabeled(n);
        for (std::size_t i = 0; i < n; ++i)
            relabeled[i] = static_cast<int>(perm[truth[i]]);
        const Matrix y_check = verify_detail::one_hot(relabeled, k);
        const Matrix t = verify_detail::one_hot(target_labels, k);

        const double frob_acc = frobenius_accuracy(y_check, t);
        const double direct_acc = accuracy(target_labels, truth);
        bool ok = std::abs(frob_acc - direct_acc) <= 1e-12;

        // Worst-view bound: for soft per-view labels and a one-hot target,
        // ACC <= 1 - (||Y̌-Y^m||² - ||T-Y^m||²)/(2N) at the worst view m.
        const std::size_t nviews = 1 + uniform_index(rng, 4);
        double worst = -1.0;
        std::size_t worst_view = 0;
        std::vector<Matrix> view_labels;
        for (std::size_t v = 0; v < nviews; ++v) {
            view_labels.push_back(verify_detail::random_soft_labels(n, k, rng));
            const double dist = squared_frobenius_diff(y_check, view_labels.back());
            if (dist > worst) {
                worst = dist;
                worst_view = v;
            }
        }
        const double bound =
            1.0 - (worst - squared_frobenius_diff(t, view_labels[worst_view])) /
                      (2.0 * static_cast<double>(n));
        if (frob_acc > bound + 1e-9) ok = false;

        if (ok) {
            report.satisfied++;
        } else {
            verify_detail::record_failure(report, {{"trial", trial},
                                                   {"n", n},
                                                   {"k", k},
                                                   {"frobenius_acc", frob_acc},
                                                   {"direct_acc", direct_acc},
                                                   {"bound", bound}});
        }
    }
    return report;
}

/// Fused k-means objective vs the scaled sum of per-view objectives under
/// a shared assignment and consistent centroids: an exact decomposition.
inline TheoremReport verify_kmeans_decomposition(std::size_t trials, std::uint64_t seed,
                                                 const VerifyOptions& opts = {}) {
    opts.validate();
    TheoremReport report{2, "scaled k-means objective decomposition", trials, 0, {}};
    Rng rng(derive_seed(seed, 0x7102));
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t nviews = 1 + uniform_index(rng, 4);  // 1..4
        const std::size_t k = 2 + uniform_index(rng, 4);       // 2..5
        const std::size_t n = k + uniform_index(rng, 40);
        std::vector<std::size_t> dims(nviews);
        std::vector<double> w(nviews);
        for (std::size_t v = 0; v < nviews; ++v) {
            dims[v] = 1 + uniform_index(rng, 4);
            w[v] = uniform_range(rng, 0.25, 4.0);
        }
        std::vector<int> assign(n);
        for (std::size_t i = 0; i < n; ++i)
            assign[i] = static_cast<int>(i < k ? i : uniform_index(rng, k));

        std::vector<Matrix> z(nviews), mu(nviews);
        for (std::size_t v = 0; v < nviews; ++v) {
            z[v].resize(n, dims[v]);
            for (double& e : z[v].data) e = gaussian(rng);
            mu[v].resize(k, dims[v]);
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t i = 0; i < n; ++i) {
                counts[assign[i]]++;
                for (std::size_t a = 0; a < dims[v]; ++a)
                    mu[v](assign[i], a) += z[v](i, a);
            }
            for (std::size_t j = 0; j < k; ++j)
                for (std::size_t a = 0; a < dims[v]; ++a)
                    mu[v](j, a) /= static_cast<double>(counts[j]);
        }

        double fused = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t v = 0; v < nviews; ++v)
                for (std::size_t a = 0; a < dims[v]; ++a) {
                    const double diff = w[v] * z[v](i, a) - w[v] * mu[v](assign[i], a);
                    fused += diff * diff;
                }
        double per_view = 0.0;
        for (std::size_t v = 0; v < nviews; ++v) {
            double obj = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                obj += squared_norm_row_diff(z[v].row_ptr(i), mu[v].row_ptr(assign[i]),
                                             dims[v]);
            per_view += w[v] * w[v] * obj;
        }

        if (std::abs(fused - per_view) <= 1e-9 * std::max(1.0, std::abs(per_view))) {
            report.satisfied++;
        } else {
            verify_detail::record_failure(
                report,
                {{"trial", trial}, {"fused", fused}, {"per_view", per_view}, {"w", w}});
        }
    }
    return report;
}

/// Views that are informative and agree on the nearest cluster transfer
/// that assignment to the fused labels for any positive scaling factors.
inline TheoremReport verify_consistency(std::size_t trials, std::uint64_t seed,
                                        const VerifyOptions& opts = {}) {
    opts.validate();
    TheoremReport report{3, "consistency across agreeing informative views", trials, 0, {}};
    Rng rng(derive_seed(seed, 0x7103));
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t nviews = 2 + uniform_index(rng, 3);  // 2..4
        const std::size_t k = 2 + uniform_index(rng, 4);       // 2..5
        const std::size_t dim = 2 + uniform_index(rng, 3);
        const std::size_t shared = uniform_index(rng, k);
        verify_detail::FusedWitness witness;
        for (std::size_t v = 0; v < nviews; ++v)
            verify_detail::place_view(
                witness, verify_detail::informative_profile(k, shared, opts.margin, rng),
                dim, rng);
        if (trial % 5 == 0) {
            // Occasional extreme factor ratio; agreement must still win.
            witness.weights.assign(nviews, 1.0);
            witness.weights[uniform_index(rng, nviews)] = 1000.0;
        } else {
            witness.weights.resize(nviews);
            for (double& x : witness.weights) x = uniform_range(rng, 1.0, std::exp(1.0));
        }
        const std::size_t fused = verify_detail::fused_nearest(witness, opts.flip_fused_sign);
        if (fused == shared) {
            report.satisfied++;
        } else {
            nlohmann::json payload = witness.to_json();
            payload["expected"] = shared;
            payload["fused"] = fused;
            payload["trial"] = trial;
            verify_detail::record_failure(report, payload);
        }
    }
    return report;
}

/// Two informative views that disagree: with equal distance gaps the view
/// with the larger factor wins; with unequal gaps the ratio of gaps is
/// the exact threshold on (w1/w2)², checked on both sides.
inline TheoremReport verify_complementarity(std::size_t trials, std::uint64_t seed,
                                            const VerifyOptions& opts = {}) {
    opts.validate();
    TheoremReport report{4, "complementarity between disagreeing informative views",
                         trials, 0, {}};
    Rng rng(derive_seed(seed, 0x7104));
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t dim = 1 + uniform_index(rng, 4);
        bool ok = true;
        nlohmann::json failure;

        {
            // Equal gaps: view 0 prefers cluster 0, view 1 prefers cluster 1.
            const double gap = uniform_range(rng, opts.margin, opts.margin + 4.0);
            const double b0 = uniform_range(rng, 0.0, 2.0);
            const double b1 = uniform_range(rng, 0.0, 2.0);
            verify_detail::FusedWitness witness;
            verify_detail::place_view(witness, {b0, b0 + gap}, dim, rng);
            verify_detail::place_view(witness, {b1 + gap, b1}, dim, rng);
            const double w_hi = uniform_range(rng, 1.3, std::exp(1.0));
            const double w_lo = uniform_range(rng, 1.0, w_hi / 1.1);
            const std::size_t strong = uniform_index(rng, 2);
            witness.weights = strong == 0 ? std::vector<double>{w_hi, w_lo}
                                          : std::vector<double>{w_lo, w_hi};
            const std::size_t fused =
                verify_detail::fused_nearest(witness, opts.flip_fused_sign);
            if (fused != strong) {
                ok = false;
                failure = witness.to_json();
                failure["case"] = "equal-gaps";
                failure["expected"] = strong;
                failure["fused"] = fused;
            }
        }

        if (ok) {
            // Unequal gaps: threshold delta = gap2/gap1 on (w1/w2)^2 flips
            // the fused assignment. View 0 prefers cluster 1, view 1
            // prefers cluster 0.
            double gap1 = uniform_range(rng, opts.margin, opts.margin + 4.0);
            double gap2 = uniform_range(rng, opts.margin, opts.margin + 4.0);
            while (std::abs(gap1 - gap2) < 1e-6)
                gap2 = uniform_range(rng, opts.margin, opts.margin + 4.0);
            const double b0 = uniform_range(rng, 0.0, 2.0);
            const double b1 = uniform_range(rng, 0.0, 2.0);
            verify_detail::FusedWitness witness;
            verify_detail::place_view(witness, {b0 + gap1, b0}, dim, rng);
            verify_detail::place_view(witness, {b1, b1 + gap2}, dim, rng);
            const double delta = gap2 / gap1;
            for (const double side : {1.0 + 1e-3, 1.0 - 1e-3}) {
                witness.weights = {std::sqrt(delta * side), 1.0};
                const std::size_t fused =
                    verify_detail::fused_nearest(witness, opts.flip_fused_sign);
                // Above the threshold view 0's assignment (cluster 1) wins,
                // below it view 1's (cluster 0).
                const std::size_t expected = side > 1.0 ? 1 : 0;
                if (fused != expected) {
                    ok = false;
                    failure = witness.to_json();
                    failure["case"] = "threshold";
                    failure["delta"] = delta;
                    failure["side"] = side;
                    failure["expected"] = expected;
                    failure["fused"] = fused;
                    break;
                }
            }
        }

        if (ok) {
            report.satisfied++;
        } else {
            failure["trial"] = trial;
            verify_detail::record_failure(report, failure);
        }
    }
    return report;
}

/// Noisy views cannot overturn informative ones, and when every view is
/// noisy the cluster they nearly agree on wins (three-cluster witness).
inline TheoremReport verify_noise_robustness(std::size_t trials, std::uint64_t seed,
                                             const VerifyOptions& opts = {}) {
    opts.validate();
    TheoremReport report{5, "robustness to noisy views", trials, 0, {}};
    Rng rng(derive_seed(seed, 0x7105));
    for (std::size_t trial = 0; trial < trials; ++trial) {
        bool ok = true;
        nlohmann::json failure;

        {
            // Informative views share one assignment; the rest are noisy.
            const std::size_t nviews = 2 + uniform_index(rng, 3);
            const std::size_t informative = 1 + uniform_index(rng, nviews - 1);
            const std::size_t k = 2 + uniform_index(rng, 4);
            const std::size_t dim = 1 + uniform_index(rng, 3);
            const std::size_t shared = uniform_index(rng, k);
            verify_detail::FusedWitness witness;
            for (std::size_t v = 0; v < nviews; ++v) {
                const auto profile =
                    v < informative
                        ? verify_detail::informative_profile(k, shared, opts.margin, rng)
                        : verify_detail::noisy_profile(k, opts.epsilon, rng);
                verify_detail::place_view(witness, profile, dim, rng);
            }
            witness.weights.assign(nviews, 1.0);
            const std::size_t fused =
                verify_detail::fused_nearest(witness, opts.flip_fused_sign);
            if (fused != shared) {
                ok = false;
                failure = witness.to_json();
                failure["case"] = "informative-plus-noisy";
                failure["expected"] = shared;
                failure["fused"] = fused;
            }
        }

        if (ok) {
            // All views noisy, one common near-tie cluster: view 0 nearly
            // ties clusters 0/1 (2 clearly farther), view 1 nearly ties
            // clusters 1/2 (0 clearly farther). Cluster 1 is common.
            const std::size_t dim = 1 + uniform_index(rng, 3);
            const double a = uniform_range(rng, 0.5, 3.0);
            const double b = uniform_range(rng, 0.5, 3.0);
            const double eta1 = uniform_range(rng, 0.0, 0.9 * opts.epsilon);
            const double eta2 = uniform_range(rng, 0.0, 0.9 * opts.epsilon);
            const double g1 = uniform_range(rng, opts.margin, opts.margin + 3.0);
            const double g2 = uniform_range(rng, opts.margin, opts.margin + 3.0);
            verify_detail::FusedWitness witness;
            verify_detail::place_view(witness, {a, a + eta1, a + g1}, dim, rng);
            verify_detail::place_view(witness, {b + g2, b, b + eta2}, dim, rng);
            witness.weights = {1.0, 1.0};
            const std::size_t fused =
                verify_detail::fused_nearest(witness, opts.flip_fused_sign);
            if (fused != 1) {
                ok = false;
                failure = witness.to_json();
                failure["case"] = "all-noisy-common-cluster";
                failure["expected"] = 1;
                failure["fused"] = fused;
            }
        }

        if (ok) {
            report.satisfied++;
        } else {
            failure["trial"] = trial;
            verify_detail::record_failure(report, failure);
        }
    }
    return report;
}

inline std::vector<TheoremReport> verify_all(std::size_t trials, std::uint64_t seed,
                                             const VerifyOptions& opts = {}) {
    return {verify_accuracy_identity(trials, seed, opts),
            verify_kmeans_decomposition(trials, seed, opts),
            verify_consistency(trials, seed, opts),
            verify_complementarity(trials, seed, opts),
            verify_noise_robustness(trials, seed, opts)};
}

inline std::string report_text(const std::vector<TheoremReport>& reports) {
    std::ostringstream os;
    for (const TheoremReport& r : reports) {
        os << "theorem " << r.theorem << " (" << r.name << "): " << r.satisfied << "/"
           << r.trials << (r.passed() ? " PASS" : " FAIL") << "\n";
        for (const std::string& c : r.counterexamples)
            os << "  counterexample: " << c << "\n";
    }
    return os.str();
}

}  // namespace mvcan
