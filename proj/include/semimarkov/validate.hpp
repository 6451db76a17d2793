#pragma once

// Standing-condition checks on a perturbed kernel at the unperturbed limit:
//
//   A  continuity of the kernel at the limit          (holds by construction
//      for polynomial dependence; recorded, not computed)
//   B  every state in 1..N reaches every other one in the embedded chain
//      without passing through the absorbing state
//   C  (a) transition-time mgfs finite at some positive exponent (automatic
//          with finite time support), and
//      (b) some return-time mgf exceeds one at an exponent below its
//          convergence abscissa, located by a log-spaced scan
//   E  the unperturbed return-time distribution is non-periodic
//
// Failures are report entries, not faults.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "semimarkov/kernel.hpp"
#include "semimarkov/moments.hpp"
#include "semimarkov/renewal.hpp"

namespace semimarkov {

struct ValidationOptions {
    std::vector<double> rho_scan; // empty: 64 log-spaced points below the abscissa
    int scan_points = 64;
    double rho_cap = 50.0;
    int period_horizon = 0; // 0: max(200, 20 * max_time)
};

struct ValidationReport {
    bool condition_A = false;
    bool condition_B = false;
    bool condition_C = false;
    bool condition_E = false;
    std::vector<std::vector<bool>> reachability; // [i-1][j-1], avoiding state 0
    double beta = 0.0;                           // largest exponent scanned
    double beta_witness = 0.0;                   // exponent with phi_ii > 1
    int witness_state = 0;
    double rho_abscissa = 0.0; // abscissa for target 1 at the limit
    std::vector<int> periods;  // per state 1..N; 0 when undefined
    std::vector<std::string> messages;

    bool all_pass() const { return condition_A && condition_B && condition_C && condition_E; }
};

// reachability of j from i (in >= 1 step) in the embedded digraph at the
// limit with the absorbing state deleted
inline std::vector<std::vector<bool>> taboo_reachability(const PerturbedKernel& kernel) {
    const int n = kernel.num_states();
    Matrix<double> p = kernel.embedded_matrix(0.0);
    std::vector<std::vector<bool>> reach(static_cast<std::size_t>(n),
                                         std::vector<bool>(static_cast<std::size_t>(n), false));
    for (int i = 1; i <= n; ++i) {
        std::vector<char> seen(static_cast<std::size_t>(n) + 1, 0);
        std::vector<int> stack;
        auto push_successors = [&](int v) {
            for (int w = 1; w <= n; ++w)
                if (p(static_cast<std::size_t>(v - 1), static_cast<std::size_t>(w)) > 0.0 &&
                    !seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = 1;
                    stack.push_back(w);
                }
        };
        push_successors(i);
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            reach[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(v - 1)] = true;
            push_successors(v);
        }
    }
    return reach;
}

inline ValidationReport validate_model(const PerturbedKernel& kernel,
                                       const ValidationOptions& opts = {}) {
    ValidationReport rep;
    const int n = kernel.num_states();

    rep.condition_A = true;
    rep.messages.push_back(
        "A: kernel entries are polynomials in the perturbation, continuous at 0 by construction");

    rep.reachability = taboo_reachability(kernel);
    rep.condition_B = true;
    for (int i = 1; i <= n && rep.condition_B; ++i)
        for (int j = 1; j <= n; ++j)
            if (!rep.reachability[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)]) {
                rep.condition_B = false;
                std::ostringstream os;
                os << "B: state " << j << " unreachable from " << i
                   << " in the limit chain avoiding the absorbing state";
                rep.messages.push_back(os.str());
                break;
            }
    if (rep.condition_B)
        rep.messages.push_back("B: all states communicate while avoiding the absorbing state");

    rep.messages.push_back(
        "C(a): transition times have finite support, so their mgfs are finite at every exponent");
    if (rep.condition_B) {
        try {
            rep.rho_abscissa = spectral_abscissa(kernel, 0.0, 1, {opts.rho_cap});
            for (int i = 1; i <= n && !rep.condition_C; ++i) {
                double abscissa = i == 1 ? rep.rho_abscissa
                                         : spectral_abscissa(kernel, 0.0, i, {opts.rho_cap});
                std::vector<double> grid = opts.rho_scan;
                if (grid.empty()) {
                    double top = 0.95 * abscissa;
                    double bottom = top * 1e-4;
                    for (int g = 0; g < opts.scan_points; ++g)
                        grid.push_back(bottom * std::pow(top / bottom,
                                                         static_cast<double>(g) /
                                                             (opts.scan_points - 1)));
                }
                for (double rho : grid) {
                    rep.beta = std::max(rep.beta, rho);
                    double phi;
                    try {
                        phi = hitting_mgf(kernel, 0.0, rho, i)[static_cast<std::size_t>(i - 1)];
                    } catch (const FinitenessError&) {
                        continue;
                    }
                    if (phi > 1.0) {
                        rep.condition_C = true;
                        rep.beta_witness = rho;
                        rep.witness_state = i;
                        std::ostringstream os;
                        os << "C(b): phi_" << i << i << "(" << rho << ") = " << phi << " > 1";
                        rep.messages.push_back(os.str());
                        break;
                    }
                }
            }
            if (!rep.condition_C)
                rep.messages.push_back(
                    "C(b): no scanned exponent below the abscissa pushes a return-time mgf above 1");
        } catch (const FinitenessError& e) {
            rep.messages.push_back(std::string("C: ") + e.what());
        }
    } else {
        rep.messages.push_back("C: skipped, condition B failed");
    }

    int horizon = opts.period_horizon > 0 ? opts.period_horizon
                                          : std::max(200, 20 * kernel.max_time());
    KernelAtEps k0 = kernel.at(0.0);
    rep.periods.assign(static_cast<std::size_t>(n), 0);
    bool any_aperiodic = false, all_defined = true;
    for (int i = 1; i <= n; ++i) {
        TabooDistribution d = taboo_distributions(k0, i, i, {}, horizon);
        try {
            rep.periods[static_cast<std::size_t>(i - 1)] = period_of(d.g);
        } catch (const FinitenessError&) {
            all_defined = false;
            std::ostringstream os;
            os << "E: state " << i << " has no return within horizon " << horizon;
            rep.messages.push_back(os.str());
            continue;
        }
        if (rep.periods[static_cast<std::size_t>(i - 1)] == 1) any_aperiodic = true;
    }
    rep.condition_E = all_defined && any_aperiodic;
    {
        std::ostringstream os;
        os << "E: periods";
        for (int d : rep.periods) os << " " << d;
        rep.messages.push_back(os.str());
    }
    return rep;
}

} // namespace semimarkov
