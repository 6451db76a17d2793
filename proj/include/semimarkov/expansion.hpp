#pragma once

// The expansion engine. For a perturbed kernel this module
//   * solves the characteristic equation phi_ii(rho) = 1 at fixed
//     perturbation (the decay exponent of non-absorption probabilities),
//   * expands transition and hitting moments at the limit exponent in
//     powers of the perturbation (exact coefficients, since the kernel
//     depends polynomially on it),
//   * runs the recursion that turns those coefficients into the expansion
//     rho(eps) = rho0 + c_1 eps + ... + c_k eps^k + o(eps^k),
//   * computes the limiting occupation constants pi_tilde_ij by two
//     independent routes and cross-checks them, and
//   * evaluates the resulting long-time prediction for the survival
//     probabilities.
//
// Everything algebraic is templated on the scalar field: double for the
// standard path, exact rationals for runs that must come out cancellation
// free.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "semimarkov/errors.hpp"
#include "semimarkov/kernel.hpp"
#include "semimarkov/matrix.hpp"
#include "semimarkov/moments.hpp"
#include "semimarkov/renewal.hpp"
#include "semimarkov/series.hpp"

namespace semimarkov {

// Non-negative integer tuples (n_1, ..., n_{q-1}) with
//   n_1 + ... + n_{q-1} = m   and   1*n_1 + 2*n_2 + ... + (q-1)*n_{q-1} = q.
// These index the products of lower-order coefficients in the root
// recursion.
struct Dmq {
    int m = 0, q = 0;
    std::vector<std::vector<int>> solutions; // lexicographic in (n_1, ..., n_{q-1})
};

inline Dmq enumerate_Dmq(int m, int q) {
    if (!(2 <= m && m <= q)) throw SchemaError("enumerate_Dmq: need 2 <= m <= q");
    Dmq d;
    d.m = m;
    d.q = q;
    std::vector<int> tuple(static_cast<std::size_t>(q - 1), 0);
    // fill n_1, n_2, ... in order with ascending values: the emitted list is
    // lexicographically sorted by construction
    auto rec = [&](auto&& self, int p, int count_left, int weight_left) -> void {
        if (p == q) {
            if (count_left == 0 && weight_left == 0) d.solutions.push_back(tuple);
            return;
        }
        int max_n = std::min(count_left, weight_left / p);
        for (int n = 0; n <= max_n; ++n) {
            tuple[static_cast<std::size_t>(p - 1)] = n;
            self(self, p + 1, count_left - n, weight_left - n * p);
        }
        tuple[static_cast<std::size_t>(p - 1)] = 0;
    };
    rec(rec, 1, m, q);
    return d;
}

struct RootOptions {
    double rho_cap = 50.0;
    double residual_tol = 1e-12;
    int max_bisection = 200;
    int max_newton = 60;
};

namespace detail {

// phi_ii(rho) and its rho-derivative without the public finiteness guard;
// callers stay inside a verified bracket below the abscissa
inline void phi_and_derivative(const PerturbedKernel& kernel, double eps, double rho, int state,
                               double* phi, double* dphi) {
    Matrix<double> full0 = transition_moments(kernel, eps, rho, 0);
    Matrix<double> jp = taboo_moment_matrix(full0, state);
    LuDecomposition<double> lu(Matrix<double>::identity(jp.rows()) - jp);
    if (lu.singular()) throw FinitenessError("hitting-moment system singular inside the bracket");
    std::vector<double> phi0 = lu.solve(moment_column(full0, state));
    if (phi) *phi = phi0[static_cast<std::size_t>(state - 1)];
    if (dphi) {
        Matrix<double> full1 = transition_moments(kernel, eps, rho, 1);
        std::vector<double> lambda = moment_column(full1, state);
        std::vector<double> extra = taboo_moment_matrix(full1, state).apply(phi0);
        for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] += extra[i];
        *dphi = lu.solve(lambda)[static_cast<std::size_t>(state - 1)];
    }
}

} // namespace detail

// Unique non-negative solution of phi_ii(rho) = 1, located by bracketed
// bisection below the convergence abscissa and polished by a safeguarded
// Newton step using the first mixed moment as the derivative. The solution
// does not depend on the reference state; callers can verify by re-solving.
inline double solve_characteristic_root(const PerturbedKernel& kernel, double eps, int state,
                                        const RootOptions& opts = {}) {
    double abscissa = spectral_abscissa(kernel, eps, state, {opts.rho_cap});
    double hi = 0.999 * abscissa;
    auto f = [&](double rho) {
        double phi;
        detail::phi_and_derivative(kernel, eps, rho, state, &phi, nullptr);
        return phi - 1.0;
    };
    double f0 = f(0.0);
    if (f0 > 1e-9) {
        std::ostringstream os;
        os << "phi_" << state << state << "(0) = " << 1.0 + f0
           << " > 1: the kernel row is super-stochastic, model invalid";
        throw FinitenessError(os.str());
    }
    if (f0 >= 0.0) return 0.0;
    double fhi = f(hi);
    if (!(fhi >= 0.0)) {
        std::ostringstream os;
        os << "no root below the convergence abscissa at eps=" << eps << " (phi_" << state << state
           << "(" << hi << ") = " << 1.0 + fhi
           << " < 1); the return-time mgf never reaches 1 on the valid range";
        throw ConvergenceError(os.str());
    }
    double lo = 0.0;
    for (int it = 0; it < opts.max_bisection && hi - lo > 1e-14 * (1.0 + hi); ++it) {
        double mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    double rho = 0.5 * (lo + hi);
    for (int it = 0; it < opts.max_newton; ++it) {
        double phi, dphi;
        detail::phi_and_derivative(kernel, eps, rho, state, &phi, &dphi);
        double resid = phi - 1.0;
        if (std::fabs(resid) <= opts.residual_tol * 0.5) break;
        if (!(dphi > 0.0)) break;
        double step = resid / dphi;
        double next = rho - step;
        if (next < lo || next > hi) next = 0.5 * (lo + hi); // keep inside the bracket
        if (resid > 0.0)
            hi = rho;
        else
            lo = rho;
        rho = next;
    }
    double final_resid;
    detail::phi_and_derivative(kernel, eps, rho, state, &final_resid, nullptr);
    if (std::fabs(final_resid - 1.0) > opts.residual_tol) {
        std::ostringstream os;
        os << "characteristic root did not converge: residual " << final_resid - 1.0;
        throw ConvergenceError(os.str());
    }
    return rho;
}

namespace detail {

template <class F>
F time_weight(const F& w, double rho0, int time, int r) {
    long long powk = 1;
    for (int t = 0; t < r; ++t) powk *= time;
    if constexpr (std::is_same_v<F, double>) {
        (void)w;
        return std::exp(rho0 * time) * static_cast<double>(powk);
    } else {
        return w.pow(time) * FieldOps<F>::from_int(powk);
    }
}

} // namespace detail

// Expansion of p_ij(rho0, r) in the perturbation, as an N x (N+1) matrix
// series of the requested order. Exact: the n-th coefficient is
// sum_k k^r w^k * (n-th polynomial coefficient of Q_ij(k)), zero-padded
// beyond the polynomial degrees. w must equal e^{rho0} in the field.
template <class F>
MatrixSeries<F> transition_moment_series_w(const PerturbedKernel& kernel, const F& w, double rho0,
                                           int r, int order) {
    const std::size_t rows = static_cast<std::size_t>(kernel.num_states());
    MatrixSeries<F> s = MatrixSeries<F>::zero(rows, rows + 1, order);
    for (const KernelEntry& e : kernel.entries()) {
        F weight = detail::time_weight(w, rho0, e.time, r);
        int top = std::min<int>(order, static_cast<int>(e.poly.size()) - 1);
        for (int n = 0; n <= top; ++n) {
            F c = FieldOps<F>::from_double(e.poly.coeffs[static_cast<std::size_t>(n)]);
            s.coeffs[static_cast<std::size_t>(n)](static_cast<std::size_t>(e.from - 1),
                                                  static_cast<std::size_t>(e.to)) += weight * c;
        }
    }
    return s;
}

inline MatrixSeries<double> transition_moment_series(const PerturbedKernel& kernel, double rho0,
                                                     int r, int order) {
    return transition_moment_series_w<double>(kernel, std::exp(rho0), rho0, r, order);
}

namespace detail {

template <class F>
MatrixSeries<F> slice_taboo(const MatrixSeries<F>& full, int target) {
    const std::size_t n = full.rows();
    MatrixSeries<F> s = MatrixSeries<F>::zero(n, n, full.order());
    for (int i = 0; i <= full.order(); ++i)
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 1; c <= n; ++c)
                if (static_cast<int>(c) != target)
                    s.coeffs[static_cast<std::size_t>(i)](r, c - 1) =
                        full.coeffs[static_cast<std::size_t>(i)](r, c);
    return s;
}

template <class F>
MatrixSeries<F> slice_column(const MatrixSeries<F>& full, int state) {
    const std::size_t n = full.rows();
    MatrixSeries<F> s = MatrixSeries<F>::zero(n, 1, full.order());
    for (int i = 0; i <= full.order(); ++i)
        for (std::size_t r = 0; r < n; ++r)
            s.coeffs[static_cast<std::size_t>(i)](r, 0) =
                full.coeffs[static_cast<std::size_t>(i)](r, static_cast<std::size_t>(state));
    return s;
}

} // namespace detail

// Expansions of the hitting-moment vectors Phi_j(rho0, r) for r = 0..k; the
// r-th table has order k - r. Built from the expansion of the resolvent
// (I - jP(rho0, eps))^{-1} and the recursive right-hand sides, term by term
// in the perturbation.
template <class F>
std::vector<MatrixSeries<F>> hitting_moment_series_w(const PerturbedKernel& kernel, const F& w,
                                                     double rho0, int target, int k) {
    std::vector<MatrixSeries<F>> p_full;
    for (int r = 0; r <= k; ++r)
        p_full.push_back(transition_moment_series_w<F>(kernel, w, rho0, r, k - r));
    std::vector<MatrixSeries<F>> jp;
    for (int r = 0; r <= k; ++r) jp.push_back(detail::slice_taboo(p_full[static_cast<std::size_t>(r)], target));
    MatrixSeries<F> u = series_neumann_inverse(jp[0]);
    std::vector<MatrixSeries<F>> phi;
    phi.push_back(series_mul(u, detail::slice_column(p_full[0], target)));
    for (int r = 1; r <= k; ++r) {
        MatrixSeries<F> lambda = detail::slice_column(p_full[static_cast<std::size_t>(r)], target);
        long long binom = 1;
        for (int m = 1; m <= r; ++m) {
            binom = binom * (r - m + 1) / m;
            MatrixSeries<F> term =
                series_mul(jp[static_cast<std::size_t>(m)], phi[static_cast<std::size_t>(r - m)]);
            lambda = series_add(lambda, series_scale(FieldOps<F>::from_int(binom), term));
        }
        phi.push_back(series_mul(u, lambda));
    }
    return phi;
}

inline std::vector<MatrixSeries<double>> hitting_moment_series(const PerturbedKernel& kernel,
                                                               double rho0, int target, int k) {
    return hitting_moment_series_w<double>(kernel, std::exp(rho0), rho0, target, k);
}

// b[r][n]: n-th perturbation coefficient of phi_ii(rho0, r) for the
// reference state, r = 0..k, n = 0..k-r
template <class F>
std::vector<std::vector<F>> moment_coefficient_table(const PerturbedKernel& kernel, const F& w,
                                                     double rho0, int state, int k) {
    std::vector<MatrixSeries<F>> phi = hitting_moment_series_w<F>(kernel, w, rho0, state, k);
    std::vector<std::vector<F>> b(static_cast<std::size_t>(k) + 1);
    for (int r = 0; r <= k; ++r) {
        const MatrixSeries<F>& s = phi[static_cast<std::size_t>(r)];
        for (int n = 0; n <= s.order(); ++n)
            b[static_cast<std::size_t>(r)].push_back(
                s.coeffs[static_cast<std::size_t>(n)](static_cast<std::size_t>(state - 1), 0));
    }
    return b;
}

// The coefficient recursion: from the table b[r][n] produce c_1..c_k with
//   c_1 = -b[0][1] / b[1][0]
//   c_n = -( b[0][n] + sum_{q=1}^{n-1} b[1][n-q] c_q
//            + sum_{m=2}^{n} sum_{q=m}^{n} b[m][n-q] *
//              sum_{tuples in D_{m,q}} prod_p c_p^{n_p} / n_p! ) / b[1][0]
// Returned as c[1..k] (index 0 unused).
template <class F>
std::vector<F> root_expansion(const std::vector<std::vector<F>>& b, int k) {
    if (static_cast<int>(b.size()) < k + 1)
        throw SchemaError("root_expansion: coefficient table shorter than requested order");
    const F zero = FieldOps<F>::from_int(0);
    if (k == 0) return {zero};
    auto bval = [&](int r, int n) -> F {
        const auto& row = b[static_cast<std::size_t>(r)];
        return n < static_cast<int>(row.size()) ? row[static_cast<std::size_t>(n)] : zero;
    };
    F denom = bval(1, 0);
    if (!(FieldOps<F>::to_double(denom) > 0.0))
        throw FinitenessError("root_expansion: first mixed moment at the limit is not positive");
    std::vector<F> c(static_cast<std::size_t>(k) + 1, zero);
    for (int n = 1; n <= k; ++n) {
        F acc = bval(0, n);
        for (int q = 1; q <= n - 1; ++q) acc += bval(1, n - q) * c[static_cast<std::size_t>(q)];
        for (int m = 2; m <= n; ++m)
            for (int q = m; q <= n; ++q) {
                Dmq d = enumerate_Dmq(m, q);
                F inner = zero;
                for (const auto& tuple : d.solutions) {
                    F prod = FieldOps<F>::from_int(1);
                    for (int p = 1; p <= q - 1; ++p) {
                        int np = tuple[static_cast<std::size_t>(p - 1)];
                        if (np == 0) continue;
                        long long fact = 1;
                        for (int t = 2; t <= np; ++t) fact *= t;
                        F power = FieldOps<F>::from_int(1);
                        for (int t = 0; t < np; ++t) power *= c[static_cast<std::size_t>(p)];
                        prod *= power / FieldOps<F>::from_int(fact);
                    }
                    inner += prod;
                }
                acc += bval(m, n - q) * inner;
            }
        c[static_cast<std::size_t>(n)] = -(acc / denom);
    }
    return c;
}

struct QsOptions {
    double tol = 1e-8;       // dual-route agreement requirement
    int max_horizon = 65536; // hard cap for the truncated route
};

// Limiting occupation constants: row i of pi_tilde. The numerator (the
// exponent-weighted occupation measure before return or absorption) is
// computed two ways and cross-checked:
//   (a) row i of (I - iP(rho0))^{-1} times the per-state weight
//       w_j(rho) = (sum_l p_jl(rho) - 1) / (e^rho - 1), with the rho -> 0
//       limit equal to the mean sojourn time;
//   (b) the truncated sum of e^{rho0 n} h_ij(n) from the occupation DP,
//       with the horizon doubled until the tail is certified or stable.
// The denominator is the first mixed return moment phi_ii(rho0, 1).
inline std::vector<double> quasi_stationary_row(const PerturbedKernel& kernel, double rho0, int i,
                                                const QsOptions& opts = {}) {
    const int n = kernel.num_states();
    double denom =
        hitting_mgf_mixed(kernel, 0.0, rho0, i, 1)[1][static_cast<std::size_t>(i - 1)];
    Matrix<double> full0 = transition_moments(kernel, 0.0, rho0, 0);
    Matrix<double> ip = taboo_moment_matrix(full0, i);
    double radius = spectral_radius_nonneg(ip);
    if (!(radius < 1.0))
        throw FinitenessError("occupation system diverges at the limit exponent");
    // row i of (I - iP)^{-1}: solve the transposed system
    Matrix<double> sys_t(ip.cols(), ip.rows());
    for (std::size_t r = 0; r < ip.rows(); ++r)
        for (std::size_t c = 0; c < ip.cols(); ++c) sys_t(c, r) = (r == c ? 1.0 : 0.0) - ip(r, c);
    std::vector<double> e_i(static_cast<std::size_t>(n), 0.0);
    e_i[static_cast<std::size_t>(i - 1)] = 1.0;
    std::vector<double> row = LuDecomposition<double>(sys_t).solve(e_i);
    std::vector<double> weight(static_cast<std::size_t>(n), 0.0);
    if (std::fabs(rho0) < 1e-9) {
        Matrix<double> mean = transition_moments(kernel, 0.0, 0.0, 1);
        for (int j = 1; j <= n; ++j) {
            double s = 0.0;
            for (int l = 0; l <= n; ++l) s += mean(static_cast<std::size_t>(j - 1), static_cast<std::size_t>(l));
            weight[static_cast<std::size_t>(j - 1)] = s;
        }
    } else {
        for (int j = 1; j <= n; ++j) {
            double s = 0.0;
            for (int l = 0; l <= n; ++l) s += full0(static_cast<std::size_t>(j - 1), static_cast<std::size_t>(l));
            weight[static_cast<std::size_t>(j - 1)] = (s - 1.0) / (std::exp(rho0) - 1.0);
        }
    }
    std::vector<double> omega(static_cast<std::size_t>(n), 0.0);
    for (int j = 1; j <= n; ++j)
        omega[static_cast<std::size_t>(j - 1)] =
            row[static_cast<std::size_t>(j - 1)] * weight[static_cast<std::size_t>(j - 1)];

    // route (b): truncated occupation sums with a doubling horizon
    KernelAtEps k0 = kernel.at(0.0);
    DecayCertificate cert = taboo_decay_certificate(k0, i, {});
    int horizon = std::max(200, 20 * kernel.max_time());
    std::vector<double> omega_hat(static_cast<std::size_t>(n), 0.0);
    double slack = std::numeric_limits<double>::infinity();
    std::vector<double> prev;
    while (true) {
        std::vector<std::vector<double>> h = occupation_before_return(k0, i, horizon);
        TabooDistribution ret = taboo_distributions(k0, i, i, {}, horizon);
        for (int j = 1; j <= n; ++j) {
            double s = 0.0;
            const auto& hj = h[static_cast<std::size_t>(j - 1)];
            for (int t = 0; t <= horizon; ++t) s += std::exp(rho0 * t) * hj[static_cast<std::size_t>(t)];
            omega_hat[static_cast<std::size_t>(j - 1)] = s;
        }
        slack = weighted_tail_bound(ret.tail_mass, rho0, horizon, kernel.max_time(), cert);
        if (slack < 1e-10) break;
        bool stable = !prev.empty();
        if (stable)
            for (int j = 0; j < n; ++j)
                if (std::fabs(omega_hat[static_cast<std::size_t>(j)] - prev[static_cast<std::size_t>(j)]) >
                    1e-9 * (1.0 + std::fabs(omega_hat[static_cast<std::size_t>(j)])))
                    stable = false;
        if (stable) {
            slack = 0.0;
            for (int j = 0; j < n; ++j)
                slack = std::max(slack, std::fabs(omega_hat[static_cast<std::size_t>(j)] -
                                                  prev[static_cast<std::size_t>(j)]));
            break;
        }
        if (2 * horizon > opts.max_horizon) break;
        prev = omega_hat;
        horizon *= 2;
    }
    for (int j = 0; j < n; ++j) {
        double delta = std::fabs(omega[static_cast<std::size_t>(j)] - omega_hat[static_cast<std::size_t>(j)]);
        double allow = opts.tol + (std::isfinite(slack) ? slack : 0.0);
        if (!(delta <= allow)) {
            std::ostringstream os;
            os << "occupation measure routes disagree for start " << i << ", state " << j + 1
               << ": closed form " << omega[static_cast<std::size_t>(j)] << " vs truncated "
               << omega_hat[static_cast<std::size_t>(j)] << " (tail slack " << slack << ")";
            throw ConsistencyError(os.str());
        }
    }
    std::vector<double> pi(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) pi[static_cast<std::size_t>(j)] = omega[static_cast<std::size_t>(j)] / denom;
    return pi;
}

struct ExpansionOptions {
    int reference_state = 1;
    double rho_cap = 50.0;
    QsOptions qs;
};

struct RootExpansion {
    double rho0 = 0.0;
    std::vector<double> c;              // c[n] multiplies eps^n; c[0] = 0
    Matrix<double> pi_tilde;            // row i-1: limits from start state i
    bool pseudo_stationary = false;     // absorption vanishes at the limit
    int order = 0;
    int reference_state = 1;
    std::vector<std::vector<double>> b; // b[r][n] for the reference state
    double root_residual = 0.0;
    double root_spread = 0.0;           // max root difference across reference states
    double rho_abscissa = 0.0;
};

// Long-time prediction: pi_tilde_ij * exp(-(rho0 + c_1 eps + ... +
// c_{r-1} eps^{r-1}) n - (eps^r n) c_r). The last factor is the correction
// carried by the balance constant lambda_r = eps^r n.
inline double asymptotic_predict(const RootExpansion& rx, int i, int j, double eps, double n,
                                 int r) {
    if (r < 1 || r > rx.order) throw SchemaError("asymptotic_predict: r outside 1..order");
    double exponent = rx.rho0;
    double ep = 1.0;
    for (int p = 1; p <= r - 1; ++p) {
        ep *= eps;
        exponent += rx.c[static_cast<std::size_t>(p)] * ep;
    }
    ep *= eps; // eps^r
    double lambda_r = ep * n;
    return rx.pi_tilde(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)) *
           std::exp(-exponent * n - lambda_r * rx.c[static_cast<std::size_t>(r)]);
}

inline RootExpansion compute_expansion(const PerturbedKernel& kernel, int k,
                                       const ExpansionOptions& opts = {}) {
    RootExpansion rx;
    rx.order = k;
    rx.reference_state = opts.reference_state;
    const int n = kernel.num_states();
    RootOptions ro;
    ro.rho_cap = opts.rho_cap;
    std::vector<double> roots;
    for (int i = 1; i <= n; ++i) roots.push_back(solve_characteristic_root(kernel, 0.0, i, ro));
    rx.rho0 = roots[static_cast<std::size_t>(opts.reference_state - 1)];
    for (double r : roots)
        for (double s : roots) rx.root_spread = std::max(rx.root_spread, std::fabs(r - s));
    rx.rho_abscissa = spectral_abscissa(kernel, 0.0, opts.reference_state, {opts.rho_cap});
    {
        double phi;
        detail::phi_and_derivative(kernel, 0.0, rx.rho0, opts.reference_state, &phi, nullptr);
        rx.root_residual = std::fabs(phi - 1.0);
    }
    Matrix<double> p0 = kernel.embedded_matrix(0.0);
    double absorb0 = 0.0;
    for (int i = 1; i <= n; ++i) absorb0 = std::max(absorb0, p0(static_cast<std::size_t>(i - 1), 0));
    rx.pseudo_stationary = absorb0 <= 1e-14;
    rx.b = moment_coefficient_table<double>(kernel, std::exp(rx.rho0), rx.rho0,
                                            opts.reference_state, k);
    std::vector<double> c = root_expansion<double>(rx.b, k);
    rx.c = std::move(c);
    rx.pi_tilde = Matrix<double>(static_cast<std::size_t>(n), static_cast<std::size_t>(n), 0.0);
    for (int i = 1; i <= n; ++i) {
        std::vector<double> row = quasi_stationary_row(kernel, rx.rho0, i, opts.qs);
        for (int j = 1; j <= n; ++j)
            rx.pi_tilde(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)) =
                row[static_cast<std::size_t>(j - 1)];
    }
    return rx;
}

// Exact-rational expansion. Valid when e^{rho0} is itself rational: always
// when rho0 = 0 (vanishing absorption), and otherwise whenever a small
// rational w matches the solved root and the exact check phi_ii(w) = 1
// passes in rational arithmetic.
struct RationalExpansion {
    double rho0 = 0.0;
    Rational w;                       // exact e^{rho0}
    std::vector<Rational> c;          // c[1..k]
    std::vector<std::vector<Rational>> b;
    int order = 0;
    int reference_state = 1;
};

namespace detail {

inline bool snap_to_rational(double x, long long max_den, double tol, Rational* out) {
    // continued-fraction convergents of x
    double val = x;
    long long p_prev = 1, q_prev = 0, p = static_cast<long long>(std::floor(val)), q = 1;
    double frac = val - std::floor(val);
    for (int it = 0; it < 64; ++it) {
        double approx = static_cast<double>(p) / static_cast<double>(q);
        if (std::fabs(approx - x) <= tol) {
            *out = Rational(p, q);
            return true;
        }
        if (frac < 1e-15) break;
        val = 1.0 / frac;
        long long a = static_cast<long long>(std::floor(val));
        frac = val - std::floor(val);
        long long p_next = a * p + p_prev, q_next = a * q + q_prev;
        if (q_next > max_den) break;
        p_prev = p;
        q_prev = q;
        p = p_next;
        q = q_next;
    }
    return false;
}

} // namespace detail

inline RationalExpansion compute_expansion_rational(const PerturbedKernel& kernel, int k,
                                                    const ExpansionOptions& opts = {}) {
    RationalExpansion rx;
    rx.order = k;
    rx.reference_state = opts.reference_state;
    RootOptions ro;
    ro.rho_cap = opts.rho_cap;
    rx.rho0 = solve_characteristic_root(kernel, 0.0, opts.reference_state, ro);
    if (rx.rho0 == 0.0) {
        rx.w = Rational(1);
    } else {
        Rational w;
        if (!detail::snap_to_rational(std::exp(rx.rho0), 1000000, 1e-9, &w))
            throw ConvergenceError(
                "exact backend: e^{rho0} is not recognizably rational; rerun without --rational");
        rx.w = w;
    }
    // verify the snapped root exactly: phi_ii(rho0) must equal 1 in rational
    // arithmetic, otherwise exactness claims downstream would be fiction
    {
        const int i = opts.reference_state;
        MatrixSeries<Rational> p_full =
            transition_moment_series_w<Rational>(kernel, rx.w, rx.rho0, 0, 0);
        Matrix<Rational> full0 = p_full.coeffs[0];
        Matrix<Rational> jp(full0.rows(), full0.rows(), Rational(0));
        for (std::size_t r = 0; r < full0.rows(); ++r)
            for (std::size_t c2 = 1; c2 <= full0.rows(); ++c2)
                if (static_cast<int>(c2) != i) jp(r, c2 - 1) = full0(r, c2);
        LuDecomposition<Rational> lu(Matrix<Rational>::identity(jp.rows()) - jp);
        if (lu.singular())
            throw ConvergenceError("exact backend: limit system singular at the snapped root");
        std::vector<Rational> rhs(full0.rows());
        for (std::size_t r = 0; r < full0.rows(); ++r) rhs[r] = full0(r, static_cast<std::size_t>(i));
        std::vector<Rational> phi = lu.solve(rhs);
        if (phi[static_cast<std::size_t>(i - 1)] != Rational(1))
            throw ConvergenceError(
                "exact backend: snapped root fails the exact characteristic equation; "
                "rerun without --rational");
    }
    rx.b = moment_coefficient_table<Rational>(kernel, rx.w, rx.rho0, opts.reference_state, k);
    rx.c = root_expansion<Rational>(rx.b, k);
    return rx;
}

} // namespace semimarkov
