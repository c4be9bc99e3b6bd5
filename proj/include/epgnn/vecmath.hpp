#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "epgnn/rng.hpp"

namespace epgnn {

using Vec = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// x += c * v
inline void axpy(std::span<double> x, double c, std::span<const double> v) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += c * v[i];
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + e^x) without overflow
inline double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

// log(sigmoid(x)) = -softplus(-x); finite for any finite x
inline double log_sigmoid(double x) { return -softplus(-x); }

// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols_, cols_); }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_).subspan(r * cols_, cols_);
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    // y = A x
    Vec matvec(std::span<const double> x) const {
        Vec y(rows_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r) y[r] = dot(row(r), x);
        return y;
    }

    // y = A^T x
    Vec matvec_t(std::span<const double> x) const {
        Vec y(cols_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r) axpy(y, x[r], row(r));
        return y;
    }

    // A += c * (u v^T)
    void add_outer(double c, std::span<const double> u, std::span<const double> v) {
        for (std::size_t r = 0; r < rows_; ++r) axpy(row(r), c * u[r], v);
    }

    void fill(double v) { data_.assign(data_.size(), v); }

    void fill_uniform(Rng& rng, double lo, double hi) {
        for (double& v : data_) v = rng.next_uniform(lo, hi);
    }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline void check_dim(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace epgnn
