#pragma once

/// @file matrix.hpp Minimal dense row-major linear algebra over doubles.

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <thread>
#include <vector>

#include "sae/common.hpp"

namespace sae {

/** Dense row-major matrix of 64-bit floats.
 *
 * The universal numeric carrier for this library: image batches, weights,
 * activations, gradients. Invariant: data().size() == rows()*cols().
 */
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values)
        : rows_(rows), cols_(cols), data_(values) {
        if (data_.size() != rows * cols)
            throw ShapeError("Matrix init list has " + std::to_string(data_.size()) +
                             " entries, expected " + std::to_string(rows * cols));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double *row(std::size_t r) { return data_.data() + r * cols_; }
    const double *row(std::size_t r) const { return data_.data() + r * cols_; }

    std::vector<double> &data() { return data_; }
    const std::vector<double> &data() const { return data_; }

    bool operator==(const Matrix &other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline std::string shape_str(const Matrix &m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

namespace detail {

/// Runs fn(begin, end) over [0, rows) split into contiguous row blocks.
/// Each row is owned by exactly one worker, so results do not depend on the
/// worker count.
template <typename Fn>
void parallel_rows(std::size_t rows, Fn &&fn) {
    const unsigned budget = max_threads();
    if (budget <= 1 || rows < 2 * budget) {
        fn(std::size_t{0}, rows);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(budget, rows);
    const std::size_t chunk = (rows + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(rows, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto &t : pool) t.join();
}

/// Dot product of two contiguous runs with four independent accumulators.
/// The association is fixed, so results are reproducible run to run.
inline double dot(const double *a, const double *b, std::size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return ((s0 + s1) + (s2 + s3));
}

} // namespace detail

/// Standard product a*b. Inner loops run over contiguous rows (i-k-j order).
inline Matrix matmul(const Matrix &a, const Matrix &b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + shape_str(a) + " * " + shape_str(b) +
                         " (inner dimensions differ)");
    Matrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    detail::parallel_rows(a.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double *ci = c.row(i);
            const double *ai = a.row(i);
            for (std::size_t k = 0; k < a.cols(); ++k) {
                const double aik = ai[k];
                const double *bk = b.row(k);
                for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
            }
        }
    });
    return c;
}

/// a * transpose(b) without materializing the transpose; rows of both
/// operands are contiguous, so this is the preferred kernel for W stored
/// row-per-output-unit.
inline Matrix matmul_bt(const Matrix &a, const Matrix &b) {
    if (a.cols() != b.cols())
        throw ShapeError("matmul_bt: " + shape_str(a) + " * " + shape_str(b) +
                         "^T (inner dimensions differ)");
    Matrix c(a.rows(), b.rows());
    detail::parallel_rows(a.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double *ci = c.row(i);
            const double *ai = a.row(i);
            for (std::size_t j = 0; j < b.rows(); ++j)
                ci[j] = detail::dot(ai, b.row(j), a.cols());
        }
    });
    return c;
}

/// transpose(a) * b, accumulated row-wise (axpy per input row).
inline Matrix matmul_at(const Matrix &a, const Matrix &b) {
    if (a.rows() != b.rows())
        throw ShapeError("matmul_at: " + shape_str(a) + "^T * " + shape_str(b) +
                         " (inner dimensions differ)");
    Matrix c(a.cols(), b.cols());
    const std::size_t n = b.cols();
    detail::parallel_rows(a.cols(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = 0; k < a.rows(); ++k) {
            const double *ak = a.row(k);
            const double *bk = b.row(k);
            for (std::size_t i = begin; i < end; ++i) {
                const double aki = ak[i];
                double *ci = c.row(i);
                for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
            }
        }
    });
    return c;
}

inline Matrix transpose(const Matrix &a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

template <typename Fn>
Matrix map(const Matrix &a, Fn &&fn) {
    Matrix r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) r.data()[i] = fn(a.data()[i]);
    return r;
}

namespace detail {
inline void require_same_shape(const Matrix &a, const Matrix &b, const char *op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(op) + ": " + shape_str(a) + " vs " + shape_str(b));
}
} // namespace detail

inline Matrix add(const Matrix &a, const Matrix &b) {
    detail::require_same_shape(a, b, "add");
    Matrix r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) r.data()[i] = a.data()[i] + b.data()[i];
    return r;
}

inline Matrix sub(const Matrix &a, const Matrix &b) {
    detail::require_same_shape(a, b, "sub");
    Matrix r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) r.data()[i] = a.data()[i] - b.data()[i];
    return r;
}

inline Matrix hadamard(const Matrix &a, const Matrix &b) {
    detail::require_same_shape(a, b, "hadamard");
    Matrix r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) r.data()[i] = a.data()[i] * b.data()[i];
    return r;
}

inline Matrix scale(const Matrix &a, double s) {
    Matrix r(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) r.data()[i] = a.data()[i] * s;
    return r;
}

/// Adds one bias vector to every row (in place).
inline void add_row_vector(Matrix &a, const std::vector<double> &v) {
    if (v.size() != a.cols())
        throw ShapeError("add_row_vector: " + shape_str(a) + " vs vector of length " +
                         std::to_string(v.size()));
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double *ri = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) ri[j] += v[j];
    }
}

/// Per-column mean over rows.
inline std::vector<double> col_mean(const Matrix &a) {
    std::vector<double> m(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double *ri = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) m[j] += ri[j];
    }
    const double inv = a.rows() > 0 ? 1.0 / static_cast<double>(a.rows()) : 0.0;
    for (double &v : m) v *= inv;
    return m;
}

/// Per-column sum over rows.
inline std::vector<double> col_sum(const Matrix &a) {
    std::vector<double> s(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double *ri = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) s[j] += ri[j];
    }
    return s;
}

inline double squared_norm(const Matrix &a) {
    return detail::dot(a.data().data(), a.data().data(), a.size());
}

/// Uniform init in +-sqrt(6/(rows+cols)). Same seed, same matrix, bit for bit.
inline Matrix glorot_init(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    if (rows < 1 || cols < 1)
        throw ConfigError("glorot_init: dimensions must be >= 1, got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    Rng rng(seed);
    for (double &v : m.data()) v = (2.0 * rng.next_unit() - 1.0) * limit;
    return m;
}

} // namespace sae
