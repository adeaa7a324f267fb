#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mvcan/hungarian.hpp"
#include "mvcan/matrix.hpp"

namespace mvcan {

namespace detail {

inline std::size_t label_span(const std::vector<int>& a) {
    int hi = -1;
    for (int x : a) {
        if (x < 0) throw std::invalid_argument("labels must be non-negative");
        if (x > hi) hi = x;
    }
    return static_cast<std::size_t>(hi + 1);
}

inline void require_equal_length(const std::vector<int>& a, const std::vector<int>& b,
                                 const std::string& what) {
    if (a.size() != b.size())
        throw std::invalid_argument(what + ": label vectors of length " +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
    if (a.empty()) throw std::invalid_argument(what + ": empty label vectors");
}

}  // namespace detail

/// Counts of co-occurring labels; rows index `a`, columns index `b`.
inline std::vector<std::vector<std::size_t>> contingency_table(const std::vector<int>& a,
                                                               const std::vector<int>& b) {
    detail::require_equal_length(a, b, "contingency_table");
    const std::size_t ra = detail::label_span(a), rb = detail::label_span(b);
    std::vector<std::vector<std::size_t>> table(ra, std::vector<std::size_t>(rb, 0));
    for (std::size_t i = 0; i < a.size(); ++i) table[a[i]][b[i]]++;
    return table;
}

/// Optimal-matching clustering accuracy: the best fraction of agreeing
/// samples over all relabelings of `pred`, solved as an assignment
/// problem on the contingency table.
inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    detail::require_equal_length(pred, truth, "accuracy");
    const std::size_t k =
        std::max(detail::label_span(pred), detail::label_span(truth));
    auto table = contingency_table(pred, truth);
    Matrix cost(k, k);  // negate counts: Hungarian minimizes
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t j = 0; j < table[i].size(); ++j)
            cost(i, j) = -static_cast<double>(table[i][j]);
    const auto match = solve_assignment(cost);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < table.size(); ++i)
        if (match[i] < table[i].size()) agree += table[i][match[i]];
    return static_cast<double>(agree) / static_cast<double>(pred.size());
}

namespace detail {

inline void require_one_hot(const Matrix& m, const std::string& what) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        std::size_t ones = 0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            const double v = m(i, j);
            if (v == 1.0)
                ones++;
            else if (v != 0.0)
                throw std::invalid_argument(what + ": row " + std::to_string(i) +
                                            " is not one-hot");
        }
        if (ones != 1)
            throw std::invalid_argument(what + ": row " + std::to_string(i) +
                                        " is not one-hot");
    }
}

}  // namespace detail

/// Accuracy in Frobenius form, 1 - ||Y̌ - T||_F²/(2N), valid for one-hot
/// matrices where each disagreeing row contributes exactly 2.
inline double frobenius_accuracy(const Matrix& y_check, const Matrix& t) {
    require_same_shape(y_check, t, "frobenius_accuracy");
    detail::require_one_hot(y_check, "frobenius_accuracy");
    detail::require_one_hot(t, "frobenius_accuracy");
    const double nf = static_cast<double>(y_check.rows);
    return 1.0 - squared_frobenius_diff(y_check, t) / (2.0 * nf);
}

/// Plug-in entropy of the empirical label distribution, natural log.
inline double entropy(const std::vector<int>& a) {
    if (a.empty()) throw std::invalid_argument("entropy: empty label vector");
    const std::size_t k = detail::label_span(a);
    std::vector<std::size_t> counts(k, 0);
    for (int x : a) counts[x]++;
    const double n = static_cast<double>(a.size());
    double h = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

/// Plug-in mutual information from the empirical contingency table.
inline double mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
    detail::require_equal_length(a, b, "mutual_information");
    const auto table = contingency_table(a, b);
    const double n = static_cast<double>(a.size());
    std::vector<double> pa(table.size(), 0.0), pb(table.empty() ? 0 : table[0].size(), 0.0);
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t j = 0; j < table[i].size(); ++j) {
            pa[i] += static_cast<double>(table[i][j]) / n;
            pb[j] += static_cast<double>(table[i][j]) / n;
        }
    double info = 0.0;
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t j = 0; j < table[i].size(); ++j) {
            if (table[i][j] == 0) continue;
            const double pij = static_cast<double>(table[i][j]) / n;
            info += pij * std::log(pij / (pa[i] * pb[j]));
        }
    return info < 0.0 ? 0.0 : info;  // clamp tiny negative rounding
}

/// Normalized mutual information 2I/(H(a)+H(b)). Degenerate conventions:
/// both partitions constant -> 1, exactly one constant -> 0.
inline double nmi(const std::vector<int>& a, const std::vector<int>& b) {
    detail::require_equal_length(a, b, "nmi");
    const double ha = entropy(a), hb = entropy(b);
    if (ha == 0.0 && hb == 0.0) return 1.0;
    if (ha == 0.0 || hb == 0.0) return 0.0;
    return 2.0 * mutual_information(a, b) / (ha + hb);
}

/// Adjusted Rand index by pair counting. Degenerate partitions with zero
/// adjusted denominator are identical up to relabeling -> 1.
inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
    detail::require_equal_length(a, b, "ari");
    if (a.size() < 2) return 1.0;
    const auto table = contingency_table(a, b);
    auto comb2 = [](std::size_t x) {
        return x < 2 ? 0.0 : static_cast<double>(x) * static_cast<double>(x - 1) / 2.0;
    };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    std::vector<std::size_t> rowsum(table.size(), 0),
        colsum(table.empty() ? 0 : table[0].size(), 0);
    for (std::size_t i = 0; i < table.size(); ++i)
        for (std::size_t j = 0; j < table[i].size(); ++j) {
            sum_ij += comb2(table[i][j]);
            rowsum[i] += table[i][j];
            colsum[j] += table[i][j];
        }
    for (std::size_t c : rowsum) sum_a += comb2(c);
    for (std::size_t c : colsum) sum_b += comb2(c);
    const double pairs = comb2(a.size());
    const double expected = sum_a * sum_b / pairs;
    const double maximum = 0.5 * (sum_a + sum_b);
    if (maximum == expected) return 1.0;
    return (sum_ij - expected) / (maximum - expected);
}

struct ClusteringMetrics {
    double acc = 0.0;
    double nmi = 0.0;
    double ari = 0.0;
};

inline ClusteringMetrics evaluate_clustering(const std::vector<int>& pred,
                                             const std::vector<int>& truth) {
    return {accuracy(pred, truth), nmi(pred, truth), ari(pred, truth)};
}

}  // namespace mvcan
