#pragma once

// Small dense matrices with LU solves, templated on the scalar field so the
// same elimination code runs in double and in exact rational arithmetic.
// State spaces here are tiny (a handful of states, at most a few hundred),
// so no blocking or structure exploitation.

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

#include "semimarkov/rational.hpp"

namespace semimarkov {

template <class T>
class Matrix {
  public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(std::size_t rows, std::size_t cols, const T& fill = T())
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n, FieldOps<T>::from_int(0));
        for (std::size_t i = 0; i < n; ++i) m(i, i) = FieldOps<T>::from_int(1);
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    friend Matrix operator+(const Matrix& a, const Matrix& b) {
        a.require_same_shape(b);
        Matrix r(a.rows_, a.cols_);
        for (std::size_t i = 0; i < a.data_.size(); ++i) r.data_[i] = a.data_[i] + b.data_[i];
        return r;
    }

    friend Matrix operator-(const Matrix& a, const Matrix& b) {
        a.require_same_shape(b);
        Matrix r(a.rows_, a.cols_);
        for (std::size_t i = 0; i < a.data_.size(); ++i) r.data_[i] = a.data_[i] - b.data_[i];
        return r;
    }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_) throw std::invalid_argument("matrix product: inner dimension mismatch");
        Matrix r(a.rows_, b.cols_, FieldOps<T>::from_int(0));
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const T& aik = a(i, k);
                if (FieldOps<T>::is_zero(aik)) continue;
                for (std::size_t j = 0; j < b.cols_; ++j)
                    r(i, j) += aik * b(k, j);
            }
        return r;
    }

    friend Matrix operator*(const T& c, const Matrix& a) {
        Matrix r(a.rows_, a.cols_);
        for (std::size_t i = 0; i < a.data_.size(); ++i) r.data_[i] = c * a.data_[i];
        return r;
    }

    Matrix& operator+=(const Matrix& b) { return *this = *this + b; }

    std::vector<T> apply(const std::vector<T>& x) const {
        if (x.size() != cols_) throw std::invalid_argument("matrix apply: size mismatch");
        std::vector<T> y(rows_, FieldOps<T>::from_int(0));
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                y[i] += (*this)(i, j) * x[j];
        return y;
    }

    double max_abs() const {
        double m = 0.0;
        for (const T& v : data_) {
            double w = FieldOps<T>::abs_weight(v);
            if (w > m) m = w;
        }
        return m;
    }

    double norm_inf() const {
        double m = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) s += FieldOps<T>::abs_weight((*this)(i, j));
            if (s > m) m = s;
        }
        return m;
    }

  private:
    std::size_t rows_, cols_;
    std::vector<T> data_;

    void require_same_shape(const Matrix& b) const {
        if (rows_ != b.rows_ || cols_ != b.cols_)
            throw std::invalid_argument("matrix shape mismatch");
    }
};

// LU factorization with partial pivoting (by double-weight magnitude, which
// for the rational backend only steers pivot choice and never the values).
template <class T>
class LuDecomposition {
  public:
    explicit LuDecomposition(Matrix<T> a) : lu_(std::move(a)), perm_(lu_.rows()), parity_(1) {
        if (lu_.rows() != lu_.cols()) throw std::invalid_argument("LU: matrix not square");
        const std::size_t n = lu_.rows();
        for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
        double scale = lu_.max_abs();
        for (std::size_t col = 0; col < n; ++col) {
            std::size_t piv = col;
            double best = -1.0;
            for (std::size_t r = col; r < n; ++r) {
                if (FieldOps<T>::is_zero(lu_(r, col))) continue;
                double w = FieldOps<T>::abs_weight(lu_(r, col));
                if (w > best) {
                    best = w;
                    piv = r;
                }
            }
            if (best < 0.0 || FieldOps<T>::is_zero(lu_(piv, col))) {
                singular_ = true;
                continue;
            }
            if constexpr (std::is_same_v<T, double>) {
                if (best <= 1e-14 * scale) singular_ = true;
            }
            if (piv != col) {
                for (std::size_t j = 0; j < n; ++j) std::swap(lu_(piv, j), lu_(col, j));
                std::swap(perm_[piv], perm_[col]);
                parity_ = -parity_;
            }
            for (std::size_t r = col + 1; r < n; ++r) {
                if (FieldOps<T>::is_zero(lu_(r, col))) continue;
                T f = lu_(r, col) / lu_(col, col);
                lu_(r, col) = f;
                for (std::size_t j = col + 1; j < n; ++j)
                    lu_(r, j) -= f * lu_(col, j);
            }
        }
    }

    bool singular() const { return singular_; }

    T det() const {
        const std::size_t n = lu_.rows();
        T d = FieldOps<T>::from_int(parity_);
        for (std::size_t i = 0; i < n; ++i) d *= lu_(i, i);
        return d;
    }

    std::vector<T> solve(const std::vector<T>& b) const {
        if (singular_) throw std::runtime_error("LU solve: singular matrix");
        const std::size_t n = lu_.rows();
        if (b.size() != n) throw std::invalid_argument("LU solve: size mismatch");
        std::vector<T> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            T s = b[perm_[i]];
            for (std::size_t j = 0; j < i; ++j) s -= lu_(i, j) * y[j];
            y[i] = s;
        }
        for (std::size_t i = n; i-- > 0;) {
            T s = y[i];
            for (std::size_t j = i + 1; j < n; ++j) s -= lu_(i, j) * y[j];
            y[i] = s / lu_(i, i);
        }
        return y;
    }

    Matrix<T> solve(const Matrix<T>& b) const {
        const std::size_t n = lu_.rows();
        Matrix<T> x(n, b.cols());
        std::vector<T> col(n);
        for (std::size_t j = 0; j < b.cols(); ++j) {
            for (std::size_t i = 0; i < n; ++i) col[i] = b(i, j);
            std::vector<T> sol = solve(col);
            for (std::size_t i = 0; i < n; ++i) x(i, j) = sol[i];
        }
        return x;
    }

    Matrix<T> inverse() const {
        return solve(Matrix<T>::identity(lu_.rows()));
    }

  private:
    Matrix<T> lu_;
    std::vector<std::size_t> perm_;
    int parity_;
    bool singular_ = false;
};

// infinity-norm condition estimate; cheap at these sizes
inline double condition_inf(const Matrix<double>& a) {
    LuDecomposition<double> lu(a);
    if (lu.singular()) return std::numeric_limits<double>::infinity();
    return a.norm_inf() * lu.inverse().norm_inf();
}

} // namespace semimarkov
