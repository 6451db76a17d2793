#pragma once

// Exact dynamic programs for the semi-Markov process at a fixed perturbation
// value: first-hitting-time distributions under taboo, occupation
// probabilities before return or absorption, and survival probabilities.
// Everything here works directly on the kernel values; it is the ground
// truth the analytic modules are validated against. Two independent routes
// compute the survival probabilities and must agree to near machine
// precision:
//   * the renewal route:  P_ij(n) = h_ij(n) + sum_{k<=n} P_ij(n-k) g_ii(k)
//   * a direct evolution of the pair chain (state, elapsed sojourn time)
//     that never forms a renewal equation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "semimarkov/errors.hpp"
#include "semimarkov/kernel.hpp"

namespace semimarkov {

// exact discrete convolution; result length is additive (len a + len b - 1)
inline std::vector<double> convolve(const std::vector<double>& f, const std::vector<double>& g) {
    if (f.empty() || g.empty()) return {};
    std::vector<double> r(f.size() + g.size() - 1, 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] == 0.0) continue;
        for (std::size_t j = 0; j < g.size(); ++j) r[i + j] += f[i] * g[j];
    }
    return r;
}

// gcd of the support {n >= 1 : mass[n] > threshold}; the period of a
// return-time distribution
inline int period_of(const std::vector<double>& mass, double threshold = 1e-14) {
    int d = 0;
    for (std::size_t n = 1; n < mass.size(); ++n)
        if (mass[n] > threshold) d = std::gcd(d, static_cast<int>(n));
    if (d == 0) throw FinitenessError("period_of: empty support");
    return d;
}

// Jump-arrival measure with a taboo set. arrivals[t][l-1] is the
// probability that some jump lands in state l at time t with every arrival
// at epochs 1..t avoiding the taboo set (state 0 is always taboo). The
// start state occupies t = 0. Mass that jumps into a taboo state or into
// the optional stop state is accounted separately.
struct ArrivalMeasure {
    std::vector<std::vector<double>> arrivals; // [t][state-1], t = 0..horizon
    std::vector<double> stopped;               // mass first hitting the stop state at time t
    std::vector<double> killed;                // cumulative mass jumped into taboo by time t
};

inline ArrivalMeasure arrival_measure(const KernelAtEps& k, int start,
                                      const std::vector<int>& taboo, int stop_state,
                                      int horizon) {
    const int n_states = k.num_states;
    std::vector<char> is_taboo(static_cast<std::size_t>(n_states) + 1, 0);
    is_taboo[0] = 1;
    for (int s : taboo) is_taboo[static_cast<std::size_t>(s)] = 1;
    ArrivalMeasure m;
    m.arrivals.assign(static_cast<std::size_t>(horizon) + 1,
                      std::vector<double>(static_cast<std::size_t>(n_states), 0.0));
    m.stopped.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
    m.killed.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
    m.arrivals[0][static_cast<std::size_t>(start - 1)] = 1.0;
    std::vector<double> killed_inc(static_cast<std::size_t>(horizon) + 1, 0.0);
    for (int t = 0; t <= horizon; ++t) {
        for (int l = 1; l <= n_states; ++l) {
            double mass = m.arrivals[static_cast<std::size_t>(t)][static_cast<std::size_t>(l - 1)];
            if (mass == 0.0) continue;
            for (int dt = 1; dt <= k.max_time; ++dt) {
                int t2 = t + dt;
                if (t2 > horizon) break;
                for (int j = 0; j <= n_states; ++j) {
                    double q = k.value(l, j, dt);
                    if (q == 0.0) continue;
                    if (j == stop_state)
                        m.stopped[static_cast<std::size_t>(t2)] += mass * q;
                    else if (is_taboo[static_cast<std::size_t>(j)])
                        killed_inc[static_cast<std::size_t>(t2)] += mass * q;
                    else
                        m.arrivals[static_cast<std::size_t>(t2)][static_cast<std::size_t>(j - 1)] +=
                            mass * q;
                }
            }
        }
    }
    double cum = 0.0;
    for (int t = 0; t <= horizon; ++t) {
        cum += killed_inc[static_cast<std::size_t>(t)];
        m.killed[static_cast<std::size_t>(t)] = cum;
    }
    return m;
}

// Distribution of the first hitting time of `target` while avoiding state 0
// and every state in `extra_taboo`. g[n] is exact for n <= horizon;
// tail_mass is the exact probability that by the horizon the walk has
// neither hit the target nor been killed.
struct TabooDistribution {
    std::vector<double> g;
    double hit_mass = 0.0;
    double killed_mass = 0.0;
    double tail_mass = 0.0;
};

inline TabooDistribution taboo_distributions(const KernelAtEps& k, int start, int target,
                                             const std::vector<int>& extra_taboo, int horizon) {
    if (horizon < k.max_time)
        throw SchemaError("taboo_distributions: horizon smaller than the kernel time support");
    ArrivalMeasure m = arrival_measure(k, start, extra_taboo, target, horizon);
    TabooDistribution d;
    d.g = std::move(m.stopped);
    d.hit_mass = std::accumulate(d.g.begin(), d.g.end(), 0.0);
    d.killed_mass = m.killed.back();
    // in-flight arrivals truncated by the horizon are part of the tail
    d.tail_mass = 1.0 - d.hit_mass - d.killed_mass;
    return d;
}

// Geometric decay certificate for the taboo walk: after block_len embedded
// jumps the surviving mass contracts by at least theta (< 1). Obtained by
// squaring the taboo jump matrix until its row-sum norm drops below 1.
struct DecayCertificate {
    int block_len = 0;
    double theta = 1.0;
    bool valid = false;
};

inline DecayCertificate taboo_decay_certificate(const KernelAtEps& k, int target,
                                                const std::vector<int>& extra_taboo,
                                                int max_doublings = 24) {
    const int n = k.num_states;
    std::vector<char> drop(static_cast<std::size_t>(n) + 1, 0);
    drop[0] = 1;
    drop[static_cast<std::size_t>(target)] = 1;
    for (int s : extra_taboo) drop[static_cast<std::size_t>(s)] = 1;
    Matrix<double> p(static_cast<std::size_t>(n), static_cast<std::size_t>(n), 0.0);
    for (int i = 1; i <= n; ++i)
        for (int j = 1; j <= n; ++j) {
            if (drop[static_cast<std::size_t>(j)]) continue;
            double s = 0.0;
            for (int dt = 1; dt <= k.max_time; ++dt) s += k.value(i, j, dt);
            p(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1)) = s;
        }
    DecayCertificate c;
    c.block_len = 1;
    Matrix<double> cur = p;
    for (int d = 0; d < max_doublings; ++d) {
        double norm = cur.norm_inf();
        if (norm < 1.0) {
            c.theta = norm;
            c.valid = true;
            return c;
        }
        cur = cur * cur;
        c.block_len *= 2;
    }
    return c;
}

// Upper bound on sum_{n > horizon} e^{rho n} mass(n) for a taboo walk whose
// unaccounted mass at the horizon is tail_mass. Each block of block_len
// further jumps spans at most block_len * max_time time units and contracts
// the surviving mass by theta; mass placed during block b >= 1 started the
// block with at most tail_mass * theta^(b-1).
inline double weighted_tail_bound(double tail_mass, double rho, int horizon, int max_time,
                                  const DecayCertificate& cert) {
    if (tail_mass <= 0.0) return 0.0;
    if (!cert.valid) return std::numeric_limits<double>::infinity();
    double block_time = static_cast<double>(cert.block_len) * max_time;
    double growth = cert.theta * std::exp(rho * block_time);
    if (!(growth < 1.0)) return std::numeric_limits<double>::infinity();
    double first_block = std::exp(rho * (horizon + block_time));
    return tail_mass * block_time * first_block *
           (1.0 + std::exp(rho * block_time) / (1.0 - growth));
}

// Occupation probabilities h_ij(n): at time n the process sits in state j
// and has neither been absorbed nor completed a return to the start state.
// h[j-1][n]; the n = 0 term is the indicator of the start state.
inline std::vector<std::vector<double>> occupation_before_return(const KernelAtEps& k, int start,
                                                                 int horizon) {
    const int n_states = k.num_states;
    ArrivalMeasure m = arrival_measure(k, start, {start}, -1, horizon);
    std::vector<std::vector<double>> h(static_cast<std::size_t>(n_states),
                                       std::vector<double>(static_cast<std::size_t>(horizon) + 1, 0.0));
    for (int j = 1; j <= n_states; ++j)
        for (int n = 0; n <= horizon; ++n) {
            double acc = 0.0;
            // sojourn tails vanish beyond the time support
            int s_lo = std::max(0, n - (k.max_time - 1));
            for (int s = s_lo; s <= n; ++s) {
                double b = m.arrivals[static_cast<std::size_t>(s)][static_cast<std::size_t>(j - 1)];
                if (b == 0.0) continue;
                acc += b * k.sojourn_tail(j, n - s);
            }
            h[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(n)] = acc;
        }
    return h;
}

// Direct route: evolve the pair chain (state, elapsed sojourn). Returns
// P_ij(n) as p[j-1][n] and the cumulative absorbed mass.
inline std::vector<std::vector<double>> survival_direct(const KernelAtEps& k, int start, int horizon,
                                                        std::vector<double>* absorbed_out) {
    const int n_states = k.num_states;
    const int max_u = k.max_time; // elapsed sojourn can reach max_time - 1
    auto idx = [&](int l, int u) {
        return static_cast<std::size_t>(l - 1) * max_u + static_cast<std::size_t>(u);
    };
    std::vector<double> w(static_cast<std::size_t>(n_states) * max_u, 0.0);
    std::vector<double> w_next(w.size(), 0.0);
    w[idx(start, 0)] = 1.0;
    std::vector<std::vector<double>> p(static_cast<std::size_t>(n_states),
                                       std::vector<double>(static_cast<std::size_t>(horizon) + 1, 0.0));
    std::vector<double> absorbed(static_cast<std::size_t>(horizon) + 1, 0.0);
    double absorbed_cum = 0.0;
    for (int n = 0; n <= horizon; ++n) {
        for (int j = 1; j <= n_states; ++j) {
            double s = 0.0;
            for (int u = 0; u < max_u; ++u) s += w[idx(j, u)];
            p[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(n)] = s;
        }
        absorbed[static_cast<std::size_t>(n)] = absorbed_cum;
        if (n == horizon) break;
        std::fill(w_next.begin(), w_next.end(), 0.0);
        for (int l = 1; l <= n_states; ++l)
            for (int u = 0; u < max_u; ++u) {
                double mass = w[idx(l, u)];
                if (mass == 0.0) continue;
                double tail_u = k.sojourn_tail(l, u);
                if (tail_u <= 0.0) continue;
                // conditional continue / jump given sojourn already > u
                if (u + 1 < max_u) {
                    double tail_u1 = k.sojourn_tail(l, u + 1);
                    if (tail_u1 > 0.0) w_next[idx(l, u + 1)] += mass * (tail_u1 / tail_u);
                }
                for (int j = 0; j <= n_states; ++j) {
                    double q = k.value(l, j, u + 1);
                    if (q == 0.0) continue;
                    double moved = mass * (q / tail_u);
                    if (j == 0)
                        absorbed_cum += moved;
                    else
                        w_next[idx(j, 0)] += moved;
                }
            }
        std::swap(w, w_next);
    }
    if (absorbed_out) *absorbed_out = std::move(absorbed);
    return p;
}

struct RenewalSolution {
    int horizon = 0;
    double eps = 0.0;
    int start = 1;
    std::vector<double> g;                // first-return distribution g_ii(n)
    std::vector<std::vector<double>> h;   // h[j-1][n]
    std::vector<std::vector<double>> p;   // P[j-1][n], renewal route
    std::vector<double> absorbed;         // cumulative absorption mass by time n
    double tail_mass = 0.0;               // unaccounted taboo mass at horizon (exact)
    DecayCertificate decay;               // geometric certificate for weighted tails
    double route_discrepancy = 0.0;       // max |renewal - direct| seen in the cross-check
};

inline RenewalSolution renewal_solve(const KernelAtEps& k, int start, int horizon) {
    if (horizon < 1) throw SchemaError("renewal_solve: horizon must be >= 1");
    if (horizon < k.max_time)
        throw SchemaError("renewal_solve: horizon smaller than the kernel time support");
    RenewalSolution sol;
    sol.horizon = horizon;
    sol.eps = k.eps;
    sol.start = start;
    TabooDistribution ret = taboo_distributions(k, start, start, {}, horizon);
    sol.g = std::move(ret.g);
    sol.tail_mass = ret.tail_mass;
    sol.decay = taboo_decay_certificate(k, start, {});
    sol.h = occupation_before_return(k, start, horizon);
    const int n_states = k.num_states;
    sol.p.assign(static_cast<std::size_t>(n_states),
                 std::vector<double>(static_cast<std::size_t>(horizon) + 1, 0.0));
    for (int j = 1; j <= n_states; ++j) {
        auto& pj = sol.p[static_cast<std::size_t>(j - 1)];
        const auto& hj = sol.h[static_cast<std::size_t>(j - 1)];
        for (int n = 0; n <= horizon; ++n) {
            double acc = hj[static_cast<std::size_t>(n)];
            for (int m = 1; m <= n; ++m)
                acc += sol.g[static_cast<std::size_t>(m)] * pj[static_cast<std::size_t>(n - m)];
            pj[static_cast<std::size_t>(n)] = acc;
        }
    }
    std::vector<double> absorbed;
    std::vector<std::vector<double>> direct = survival_direct(k, start, horizon, &absorbed);
    sol.absorbed = std::move(absorbed);
    double worst = 0.0;
    for (int j = 0; j < n_states; ++j)
        for (int n = 0; n <= horizon; ++n)
            worst = std::max(worst, std::fabs(sol.p[static_cast<std::size_t>(j)][static_cast<std::size_t>(n)] -
                                              direct[static_cast<std::size_t>(j)][static_cast<std::size_t>(n)]));
    sol.route_discrepancy = worst;
    if (worst > 1e-12) {
        std::ostringstream os;
        os << "renewal_solve: renewal route and direct route disagree by " << worst;
        throw ConsistencyError(os.str());
    }
    return sol;
}

inline RenewalSolution renewal_solve(const PerturbedKernel& kernel, double eps, int start,
                                     int horizon) {
    return renewal_solve(kernel.at(eps), start, horizon);
}

inline int default_horizon(const PerturbedKernel& kernel) {
    return std::max(200, 20 * kernel.max_time());
}

} // namespace semimarkov
