#pragma once

// Truncated power-series arithmetic in the perturbation parameter. A series
// of order k carries coefficients A_0..A_k and stands for
// A_0 + A_1 e + ... + A_k e^k + o(e^k). Binary operations truncate to the
// smaller operand order; there is no silent padding.

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "semimarkov/matrix.hpp"

namespace semimarkov {

template <class T>
struct MatrixSeries {
    std::vector<Matrix<T>> coeffs; // coeffs[i] multiplies e^i

    MatrixSeries() = default;
    explicit MatrixSeries(std::vector<Matrix<T>> c) : coeffs(std::move(c)) {
        if (coeffs.empty()) throw std::invalid_argument("series needs at least the order-0 coefficient");
        for (const auto& m : coeffs)
            if (m.rows() != coeffs[0].rows() || m.cols() != coeffs[0].cols())
                throw std::invalid_argument("series coefficients differ in shape");
    }

    static MatrixSeries zero(std::size_t rows, std::size_t cols, int order) {
        MatrixSeries s;
        s.coeffs.assign(static_cast<std::size_t>(order) + 1, Matrix<T>(rows, cols, FieldOps<T>::from_int(0)));
        return s;
    }

    static MatrixSeries constant(Matrix<T> a0, int order) {
        MatrixSeries s = zero(a0.rows(), a0.cols(), order);
        s.coeffs[0] = std::move(a0);
        return s;
    }

    int order() const { return static_cast<int>(coeffs.size()) - 1; }
    std::size_t rows() const { return coeffs[0].rows(); }
    std::size_t cols() const { return coeffs[0].cols(); }

    Matrix<T> eval(const T& eps) const {
        Matrix<T> v = coeffs.back();
        for (std::size_t i = coeffs.size() - 1; i-- > 0;)
            v = coeffs[i] + eps * v;
        return v;
    }

    MatrixSeries truncated(int k) const {
        if (k < 0 || k > order()) throw std::invalid_argument("bad truncation order");
        MatrixSeries s;
        s.coeffs.assign(coeffs.begin(), coeffs.begin() + k + 1);
        return s;
    }
};

template <class T>
MatrixSeries<T> series_scale(const T& c, const MatrixSeries<T>& a) {
    MatrixSeries<T> r = a;
    for (auto& m : r.coeffs) m = c * m;
    return r;
}

template <class T>
MatrixSeries<T> series_add(const MatrixSeries<T>& a, const MatrixSeries<T>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("series_add: shape mismatch");
    int k = std::min(a.order(), b.order());
    MatrixSeries<T> r = MatrixSeries<T>::zero(a.rows(), a.cols(), k);
    for (int i = 0; i <= k; ++i)
        r.coeffs[static_cast<std::size_t>(i)] = a.coeffs[static_cast<std::size_t>(i)] +
                                                b.coeffs[static_cast<std::size_t>(i)];
    return r;
}

// Cauchy product truncated to the smaller operand order
template <class T>
MatrixSeries<T> series_mul(const MatrixSeries<T>& a, const MatrixSeries<T>& b) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("series_mul: inner dimension mismatch");
    int k = std::min(a.order(), b.order());
    MatrixSeries<T> r = MatrixSeries<T>::zero(a.rows(), b.cols(), k);
    for (int i = 0; i <= k; ++i)
        for (int j = 0; j <= i; ++j)
            r.coeffs[static_cast<std::size_t>(i)] +=
                a.coeffs[static_cast<std::size_t>(j)] * b.coeffs[static_cast<std::size_t>(i - j)];
    return r;
}

// Expansion of (I - A(e))^{-1}: C_0 = (I - A_0)^{-1} and
// C_i = C_0 * sum_{j=1..i} A_j C_{i-j}. Requires det(I - A_0) != 0; a
// singular limit matrix means the underlying moment vector diverges at this
// exponent and there is nothing to expand.
template <class T>
MatrixSeries<T> series_neumann_inverse(const MatrixSeries<T>& a) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("series_neumann_inverse: matrix not square");
    const std::size_t n = a.rows();
    Matrix<T> i_minus_a0 = Matrix<T>::identity(n) - a.coeffs[0];
    LuDecomposition<T> lu(i_minus_a0);
    bool bad = lu.singular();
    if constexpr (std::is_same_v<T, double>) {
        double scale = std::max(1.0, i_minus_a0.max_abs());
        if (!bad && std::fabs(lu.det()) <= 1e-12 * scale) bad = true;
    }
    if (bad)
        throw std::runtime_error(
            "series_neumann_inverse: I - A_0 is singular (limit system has no finite solution)");
    MatrixSeries<T> c = MatrixSeries<T>::zero(n, n, a.order());
    c.coeffs[0] = lu.solve(Matrix<T>::identity(n));
    for (int i = 1; i <= a.order(); ++i) {
        Matrix<T> s(n, n, FieldOps<T>::from_int(0));
        for (int j = 1; j <= i; ++j)
            s += a.coeffs[static_cast<std::size_t>(j)] * c.coeffs[static_cast<std::size_t>(i - j)];
        c.coeffs[static_cast<std::size_t>(i)] = c.coeffs[0] * s;
    }
    return c;
}

// Scalar expansions: coefficient list of A_0..A_k.
template <class T>
struct EpsSeries {
    std::vector<T> coeffs;

    int order() const { return static_cast<int>(coeffs.size()) - 1; }

    T eval(const T& eps) const {
        T v = coeffs.back();
        for (std::size_t i = coeffs.size() - 1; i-- > 0;)
            v = coeffs[i] + eps * v;
        return v;
    }
};

} // namespace semimarkov
