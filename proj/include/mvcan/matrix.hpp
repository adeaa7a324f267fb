#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mvcan {

/// Thrown when matrix or layer dimensions do not chain.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an operation is called before its required state exists
/// (e.g. backward without a cached forward pass).
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Dense row-major matrix of 64-bit floats. Rows are samples throughout
/// the library.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major, rows*cols entries

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    double* row_ptr(std::size_t i) { return data.data() + i * cols; }
    const double* row_ptr(std::size_t i) const { return data.data() + i * cols; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void resize(std::size_t r, std::size_t c) {
        rows = r;
        cols = c;
        data.assign(r * c, 0.0);
    }

    bool operator==(const Matrix& o) const {
        return rows == o.rows && cols == o.cols && data == o.data;
    }
};

namespace detail {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<EigenRowMajor> emap(Matrix& m) {
    return {m.data.data(), static_cast<Eigen::Index>(m.rows),
            static_cast<Eigen::Index>(m.cols)};
}

inline Eigen::Map<const EigenRowMajor> emap(const Matrix& m) {
    return {m.data.data(), static_cast<Eigen::Index>(m.rows),
            static_cast<Eigen::Index>(m.cols)};
}

}  // namespace detail

inline bool all_finite(const Matrix& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

inline void require_finite(const Matrix& m, const std::string& what) {
    if (!all_finite(m)) throw std::runtime_error(what + ": non-finite values");
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what) {
    if (!a.same_shape(b))
        throw ShapeError(what + ": shapes " + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + " vs " + std::to_string(b.rows) + "x" +
                         std::to_string(b.cols));
}

/// c = a * b with a: m×k, b: k×n.
inline void matmul_into(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols) + " vs " +
                         std::to_string(b.rows));
    c.resize(a.rows, b.cols);
    detail::emap(c).noalias() = detail::emap(a) * detail::emap(b);
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    Matrix c;
    matmul_into(a, b, c);
    return c;
}

inline Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// c = a * bᵀ with a: m×k, b: n×k.
inline void matmul_nt_into(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.cols != b.cols)
        throw ShapeError("matmul_nt: inner dimensions " + std::to_string(a.cols) + " vs " +
                         std::to_string(b.cols));
    c.resize(a.rows, b.rows);
    detail::emap(c).noalias() = detail::emap(a) * detail::emap(b).transpose();
}

inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    Matrix c;
    matmul_nt_into(a, b, c);
    return c;
}

/// c = aᵀ * b with a: k×m, b: k×n.
inline void matmul_tn_into(const Matrix& a, const Matrix& b, Matrix& c) {
    if (a.rows != b.rows)
        throw ShapeError("matmul_tn: inner dimensions " + std::to_string(a.rows) + " vs " +
                         std::to_string(b.rows));
    c.resize(a.cols, b.cols);
    detail::emap(c).noalias() = detail::emap(a).transpose() * detail::emap(b);
}

/// ||a - b||_F^2
inline double squared_frobenius_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "squared_frobenius_diff");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc;
}

inline double squared_norm_row_diff(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double d = a[j] - b[j];
        acc += d * d;
    }
    return acc;
}

/// Copies the listed rows of `src` into a new matrix, in the given order.
inline Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), src.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const double* s = src.row_ptr(idx[r]);
        double* d = out.row_ptr(r);
        for (std::size_t j = 0; j < src.cols; ++j) d[j] = s[j];
    }
    return out;
}

}  // namespace mvcan
