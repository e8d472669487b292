#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace specdet {

/// Dense row-major matrix of doubles. Small sizes only (image channels,
/// rotation factors); no view machinery, everything is a value.
class Matrix {
public:
    Matrix() = default;

    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
        if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative dimension");
    }

    Matrix(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = static_cast<int>(init.size());
        cols_ = rows_ > 0 ? static_cast<int>(init.begin()->size()) : 0;
        data_.reserve(static_cast<std::size_t>(rows_) * cols_);
        for (const auto& row : init) {
            if (static_cast<int>(row.size()) != cols_)
                throw std::invalid_argument("Matrix: ragged initializer");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    static Matrix identity(int n) {
        Matrix m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Matrix& operator+=(const Matrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }

    Matrix& operator-=(const Matrix& o) {
        require_same_shape(o);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }

    Matrix& operator*=(double c) {
        for (double& v : data_) v *= c;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double c) { return a *= c; }
    friend Matrix operator*(double c, Matrix a) { return a *= c; }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    void require_same_shape(const Matrix& o) const {
        if (!same_shape(o)) throw std::invalid_argument("Matrix: shape mismatch");
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

inline double frobenius(const Matrix& m) {
    double sum = 0.0;
    for (double v : m.data()) sum += v * v;
    return std::sqrt(sum);
}

inline double max_abs(const Matrix& m) {
    double best = 0.0;
    for (double v : m.data()) best = std::max(best, std::abs(v));
    return best;
}

/// a^T b over column j of two matrices with equal row count.
inline double column_dot(const Matrix& m, int ja, int jb) {
    double sum = 0.0;
    for (int i = 0; i < m.rows(); ++i) sum += m(i, ja) * m(i, jb);
    return sum;
}

/// Largest singular value by power iteration on A^T A. Used where the full
/// decomposition would be wasted (perturbation norms in bulk checks).
inline double spectral_norm_power(const Matrix& a, int max_iters = 300, double tol = 1e-13) {
    const int n = a.cols();
    if (n == 0 || a.rows() == 0) return 0.0;
    std::vector<double> v(n), av(a.rows()), atav(n);
    // deterministic start, biased off any single axis
    for (int j = 0; j < n; ++j) v[j] = 1.0 + 1e-3 * (j % 7);
    double norm = 0.0, prev = -1.0;
    for (int it = 0; it < max_iters; ++it) {
        for (int i = 0; i < a.rows(); ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += a(i, j) * v[j];
            av[i] = s;
        }
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = 0; i < a.rows(); ++i) s += a(i, j) * av[i];
            atav[j] = s;
        }
        double vn = 0.0;
        for (double x : atav) vn += x * x;
        vn = std::sqrt(vn);
        if (vn == 0.0) return 0.0;
        for (int j = 0; j < n; ++j) v[j] = atav[j] / vn;
        double ray = 0.0;
        for (int i = 0; i < a.rows(); ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += a(i, j) * v[j];
            ray += s * s;
        }
        norm = std::sqrt(ray);
        if (prev >= 0.0 && std::abs(norm - prev) <= tol * std::max(norm, 1e-300)) break;
        prev = norm;
    }
    return norm;
}

} // namespace specdet
