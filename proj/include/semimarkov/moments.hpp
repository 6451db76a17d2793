#pragma once

// Mixed power-exponential moments of transition and first-hitting times at a
// fixed perturbation value. The hitting moments solve taboo linear systems:
// with the target column j zeroed out of the transition-moment matrix,
//
//     Phi_j(rho)    = p_j(rho)      + jP(rho) Phi_j(rho)
//     Phi_j(rho,r)  = lambda_j(rho,r) + jP(rho) Phi_j(rho,r)
//     lambda_j(rho,r) = p_j(rho,r) + sum_{m=1..r} C(r,m) jP(rho,m) Phi_j(rho,r-m)
//
// all solved with one LU factorization of I - jP(rho). The system has a
// finite solution exactly when the spectral radius of jP(rho) is below one;
// the supremum of valid exponents (the convergence abscissa) is found by
// bisection on the spectral radius.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "semimarkov/errors.hpp"
#include "semimarkov/kernel.hpp"
#include "semimarkov/matrix.hpp"

namespace semimarkov {

// p_ij(rho, r) = sum_k k^r e^{rho k} Q_ij(k); N x (N+1), exact finite sums
inline Matrix<double> transition_moments(const PerturbedKernel& kernel, double eps, double rho,
                                         int r) {
    kernel.require_eps(eps);
    Matrix<double> m(static_cast<std::size_t>(kernel.num_states()),
                     static_cast<std::size_t>(kernel.num_states()) + 1, 0.0);
    for (const KernelEntry& e : kernel.entries()) {
        double w = std::exp(rho * e.time) * std::pow(static_cast<double>(e.time), r);
        m(static_cast<std::size_t>(e.from - 1), static_cast<std::size_t>(e.to)) +=
            w * e.poly.eval(eps);
    }
    return m;
}

// N x N taboo matrix over states 1..N with the target column (and any extra
// taboo columns) zeroed
inline Matrix<double> taboo_moment_matrix(const Matrix<double>& full, int target,
                                          const std::vector<int>& extra_taboo = {}) {
    const std::size_t n = full.rows();
    Matrix<double> m(n, n, 0.0);
    std::vector<char> drop(n + 1, 0);
    drop[static_cast<std::size_t>(target)] = 1;
    for (int s : extra_taboo) drop[static_cast<std::size_t>(s)] = 1;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 1; j <= n; ++j)
            if (!drop[j]) m(i, j - 1) = full(i, j);
    return m;
}

inline std::vector<double> moment_column(const Matrix<double>& full, int state) {
    std::vector<double> v(full.rows());
    for (std::size_t i = 0; i < full.rows(); ++i) v[i] = full(i, static_cast<std::size_t>(state));
    return v;
}

// true iff the non-negative matrix has no cycle through its support, in
// which case its spectral radius is exactly zero at every exponent
inline bool support_is_acyclic(const Matrix<double>& a) {
    const std::size_t n = a.rows();
    std::vector<int> color(n, 0); // 0 white, 1 grey, 2 black
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < n; ++s) {
        if (color[s] != 0) continue;
        stack.push_back(s);
        while (!stack.empty()) {
            std::size_t v = stack.back();
            if (color[v] == 0) {
                color[v] = 1;
                for (std::size_t w = 0; w < n; ++w) {
                    if (a(v, w) == 0.0) continue;
                    if (color[w] == 1) return false;
                    if (color[w] == 0) stack.push_back(w);
                }
            } else {
                if (color[v] == 1) color[v] = 2;
                stack.pop_back();
            }
        }
    }
    return true;
}

// spectral radius of a non-negative matrix by power iteration on A + I (the
// shift separates the dominant eigenvalue from the rest of the peripheral
// spectrum of a periodic support)
inline double spectral_radius_nonneg(const Matrix<double>& a, double tol = 1e-13,
                                     int max_iter = 200000) {
    const std::size_t n = a.rows();
    if (n == 0) return 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (!std::isfinite(a(i, j))) return std::numeric_limits<double>::infinity();
    if (support_is_acyclic(a)) return 0.0;
    std::vector<double> x(n, 1.0), y(n, 0.0);
    double lambda = 1.0;
    for (int it = 0; it < max_iter; ++it) {
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = x[i];
            for (std::size_t j = 0; j < n; ++j) s += a(i, j) * x[j];
            y[i] = s;
            norm += s;
        }
        if (!std::isfinite(norm)) return std::numeric_limits<double>::infinity();
        double sum_x = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum_x += x[i];
        double next = norm / sum_x;
        for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / norm;
        if (it > 8 && std::fabs(next - lambda) <= tol * (1.0 + std::fabs(next))) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return lambda - 1.0;
}

struct AbscissaOptions {
    double rho_cap = 50.0; // reported when the taboo walk never reaches criticality
    double tol = 1e-12;
};

// sup{ rho : spectral radius of jP(rho) < 1 }, the convergence abscissa of
// the taboo moment system
inline double spectral_abscissa(const PerturbedKernel& kernel, double eps, int target,
                                const AbscissaOptions& opts = {}) {
    auto radius_at = [&](double rho) {
        return spectral_radius_nonneg(
            taboo_moment_matrix(transition_moments(kernel, eps, rho, 0), target));
    };
    Matrix<double> p0 = taboo_moment_matrix(transition_moments(kernel, eps, 0.0, 0), target);
    if (support_is_acyclic(p0)) return opts.rho_cap;
    double r0 = radius_at(0.0);
    if (r0 >= 1.0 - 1e-12) {
        std::ostringstream os;
        os << "taboo system for target " << target << " is already critical at rho=0 (radius "
           << r0 << "); the communicating-class structure is degenerate";
        throw FinitenessError(os.str());
    }
    double lo = 0.0, hi = 0.25;
    while (hi < opts.rho_cap) {
        if (radius_at(hi) >= 1.0) break;
        lo = hi;
        hi *= 2.0;
    }
    if (hi >= opts.rho_cap) {
        hi = opts.rho_cap;
        if (radius_at(hi) < 1.0) return opts.rho_cap;
    }
    for (int it = 0; it < 200 && hi - lo > opts.tol; ++it) {
        double mid = 0.5 * (lo + hi);
        if (radius_at(mid) < 1.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Solver for all hitting-moment systems that share (eps, rho, target): one
// LU factorization, reused across moment orders and right-hand sides.
// Immutable after construction, safe to share across threads.
class MomentSolver {
  public:
    MomentSolver(const PerturbedKernel& kernel, double eps, double rho, int target,
                 const std::vector<int>& extra_taboo = {})
        : kernel_(&kernel), eps_(eps), rho_(rho), target_(target), extra_taboo_(extra_taboo) {
        Matrix<double> full = transition_moments(kernel, eps, rho, 0);
        Matrix<double> jp = taboo_moment_matrix(full, target, extra_taboo);
        double radius = spectral_radius_nonneg(jp);
        if (!(radius < 1.0)) {
            std::ostringstream os;
            os << "hitting moments diverge at rho=" << rho << " (taboo spectral radius " << radius
               << " >= 1); the moment system only has a finite solution below the convergence "
                  "abscissa";
            throw FinitenessError(os.str());
        }
        const std::size_t n = jp.rows();
        Matrix<double> sys = Matrix<double>::identity(n) - jp;
        double cond = condition_inf(sys);
        if (cond > 1e12)
            std::fprintf(stderr,
                         "warning: hitting-moment system condition number %.3g at rho=%.17g\n",
                         cond, rho);
        lu_.emplace(sys);
        p_full_ = std::move(full);
    }

    // Phi_j(rho): i-th entry is the mgf of the first hitting time of the
    // target from state i+1, on the event of no earlier absorption
    std::vector<double> hitting_mgf() const {
        return lu_->solve(moment_column(p_full_, target_));
    }

    // Phi_j(rho, r) for r = 0..r_max via the recursive right-hand sides
    std::vector<std::vector<double>> hitting_mgf_mixed(int r_max) const {
        std::vector<std::vector<double>> phi;
        phi.push_back(hitting_mgf());
        std::vector<Matrix<double>> jp_r; // jP(rho, m), m = 1..r_max
        for (int m = 1; m <= r_max; ++m)
            jp_r.push_back(taboo_moment_matrix(
                transition_moments(*kernel_, eps_, rho_, m), target_, extra_taboo_));
        for (int r = 1; r <= r_max; ++r) {
            std::vector<double> lambda =
                moment_column(transition_moments(*kernel_, eps_, rho_, r), target_);
            double binom = 1.0;
            for (int m = 1; m <= r; ++m) {
                binom = binom * (r - m + 1) / m;
                std::vector<double> contrib =
                    jp_r[static_cast<std::size_t>(m - 1)].apply(phi[static_cast<std::size_t>(r - m)]);
                for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] += binom * contrib[i];
            }
            phi.push_back(lu_->solve(lambda));
        }
        return phi;
    }

    // absorption mgf: same system, right-hand side is the absorbing column
    std::vector<double> absorption_mgf() const {
        return lu_->solve(moment_column(p_full_, 0));
    }

  private:
    const PerturbedKernel* kernel_;
    double eps_, rho_;
    int target_;
    std::vector<int> extra_taboo_;
    std::optional<LuDecomposition<double>> lu_;
    Matrix<double> p_full_;
};

inline std::vector<double> hitting_mgf(const PerturbedKernel& kernel, double eps, double rho,
                                       int target) {
    return MomentSolver(kernel, eps, rho, target).hitting_mgf();
}

inline std::vector<std::vector<double>> hitting_mgf_mixed(const PerturbedKernel& kernel, double eps,
                                                          double rho, int target, int r_max) {
    return MomentSolver(kernel, eps, rho, target).hitting_mgf_mixed(r_max);
}

inline std::vector<double> absorption_mgf(const PerturbedKernel& kernel, double eps, double rho,
                                          int target) {
    return MomentSolver(kernel, eps, rho, target).absorption_mgf();
}

// mgf of the first hitting time of `target` avoiding both the absorbing
// state and `taboo`
inline std::vector<double> taboo_hitting_mgf(const PerturbedKernel& kernel, double eps, double rho,
                                             int target, int taboo) {
    return MomentSolver(kernel, eps, rho, target, {taboo}).hitting_mgf();
}

// Residual of the return-time solidarity identity
//   (1 - phi_ii)(1 - iphi_jj) = (1 - phi_jj)(1 - jphi_ii)
// which must vanish whenever phi_ii(rho) <= 1.
inline double solidarity_residual(const PerturbedKernel& kernel, double eps, double rho, int i,
                                  int j) {
    if (i == j) return 0.0;
    double phi_ii = hitting_mgf(kernel, eps, rho, i)[static_cast<std::size_t>(i - 1)];
    if (phi_ii > 1.0 + 1e-9) {
        std::ostringstream os;
        os << "solidarity identity needs phi_ii(rho) <= 1, got " << phi_ii << " at rho=" << rho;
        throw FinitenessError(os.str());
    }
    double phi_jj = hitting_mgf(kernel, eps, rho, j)[static_cast<std::size_t>(j - 1)];
    double iphi_jj = taboo_hitting_mgf(kernel, eps, rho, j, i)[static_cast<std::size_t>(j - 1)];
    double jphi_ii = taboo_hitting_mgf(kernel, eps, rho, i, j)[static_cast<std::size_t>(i - 1)];
    return std::fabs((1.0 - phi_ii) * (1.0 - iphi_jj) - (1.0 - phi_jj) * (1.0 - jphi_ii));
}

} // namespace semimarkov
