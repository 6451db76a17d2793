#pragma once

// Monte Carlo sampling of the perturbed semi-Markov process. Each
// trajectory draws (next state, sojourn) jointly from the kernel row by
// inverse CDF over a precomputed prefix table. Every trial owns a generator
// seeded from (seed, trial index), so estimates are bit-identical no matter
// how trials are partitioned across workers.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include "semimarkov/errors.hpp"
#include "semimarkov/kernel.hpp"

namespace semimarkov {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256** seeded through splitmix64
class TrialRng {
  public:
    TrialRng(std::uint64_t seed, std::uint64_t trial) {
        std::uint64_t sm = seed ^ (0x6a09e667f3bcc909ULL + trial * 0x9e3779b97f4a7c15ULL);
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next() {
        std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  private:
    std::uint64_t s_[4];
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
};

struct SimConfig {
    double eps = 0.0;
    int initial_state = 1;
    long long horizon = 100;
    long long trials = 100000;
    std::uint64_t seed = 1;
};

struct SimEstimate {
    std::vector<double> p_hat;       // estimated P_ij(n), j = 1..N
    std::vector<double> se;          // binomial standard errors
    double absorbed_hat = 0.0;
    std::vector<long long> counts;   // per state 1..N, then absorbed
    long long trials = 0;
    std::uint64_t seed = 0;
};

// flattened per-state sampling tables: cumulative probability over all
// (destination, sojourn) pairs of the row
struct SamplingTable {
    struct Cell {
        double cum;
        int to;
        int time;
    };
    std::vector<std::vector<Cell>> rows; // [state-1]

    static SamplingTable build(const KernelAtEps& k) {
        SamplingTable t;
        t.rows.resize(static_cast<std::size_t>(k.num_states));
        for (int i = 1; i <= k.num_states; ++i) {
            double cum = 0.0;
            auto& row = t.rows[static_cast<std::size_t>(i - 1)];
            for (int j = 0; j <= k.num_states; ++j)
                for (int dt = 1; dt <= k.max_time; ++dt) {
                    double q = k.value(i, j, dt);
                    if (q <= 0.0) continue;
                    cum += q;
                    row.push_back({cum, j, dt});
                }
            if (!row.empty()) row.back().cum = 1.0; // close rounding at the top
        }
        return t;
    }

    const Cell& draw(int state, double u) const {
        const auto& row = rows[static_cast<std::size_t>(state - 1)];
        std::size_t lo = 0, hi = row.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (row[mid].cum < u)
                lo = mid + 1;
            else
                hi = mid;
        }
        return row[lo];
    }
};

inline SimEstimate simulate(const PerturbedKernel& kernel, const SimConfig& cfg) {
    if (cfg.trials < 1) throw SchemaError("simulate: trials must be >= 1");
    kernel.require_eps(cfg.eps);
    if (cfg.initial_state < 1 || cfg.initial_state > kernel.num_states())
        throw SchemaError("simulate: initial state outside 1..N");
    KernelAtEps k = kernel.at(cfg.eps);
    SamplingTable table = SamplingTable::build(k);
    const int n_states = k.num_states;
    std::vector<long long> counts(static_cast<std::size_t>(n_states) + 1, 0);
    for (long long trial = 0; trial < cfg.trials; ++trial) {
        TrialRng rng(cfg.seed, static_cast<std::uint64_t>(trial));
        int state = cfg.initial_state;
        long long t = 0;
        while (true) {
            const auto& cell = table.draw(state, rng.uniform());
            if (t + cell.time > cfg.horizon) {
                counts[static_cast<std::size_t>(state - 1)]++; // still sitting here at the horizon
                break;
            }
            t += cell.time;
            if (cell.to == 0) {
                counts[static_cast<std::size_t>(n_states)]++; // absorbed by the horizon
                break;
            }
            state = cell.to;
        }
    }
    SimEstimate est;
    est.trials = cfg.trials;
    est.seed = cfg.seed;
    est.counts = counts;
    est.p_hat.resize(static_cast<std::size_t>(n_states));
    est.se.resize(static_cast<std::size_t>(n_states));
    for (int j = 0; j < n_states; ++j) {
        double p = static_cast<double>(counts[static_cast<std::size_t>(j)]) / cfg.trials;
        est.p_hat[static_cast<std::size_t>(j)] = p;
        est.se[static_cast<std::size_t>(j)] = std::sqrt(p * (1.0 - p) / cfg.trials);
    }
    est.absorbed_hat = static_cast<double>(counts[static_cast<std::size_t>(n_states)]) / cfg.trials;
    return est;
}

struct HittingMomentEstimate {
    // sample estimates of E_i mu_j^r on the event of hitting j before
    // absorption, r = 0..3
    double mean[4] = {0, 0, 0, 0};
    double se[4] = {0, 0, 0, 0};
    long long trials = 0;
    long long censored = 0; // trajectories cut by the step guard
};

inline HittingMomentEstimate sample_hitting_moments(const PerturbedKernel& kernel,
                                                    const SimConfig& cfg, int target) {
    kernel.require_eps(cfg.eps);
    KernelAtEps k = kernel.at(cfg.eps);
    SamplingTable table = SamplingTable::build(k);
    HittingMomentEstimate est;
    est.trials = cfg.trials;
    double sum[4] = {0, 0, 0, 0}, sumsq[4] = {0, 0, 0, 0};
    const long long step_guard = 100000000; // semi-Markov time, not jumps
    for (long long trial = 0; trial < cfg.trials; ++trial) {
        TrialRng rng(cfg.seed, static_cast<std::uint64_t>(trial));
        int state = cfg.initial_state;
        long long t = 0;
        double value[4] = {0, 0, 0, 0};
        while (true) {
            const auto& cell = table.draw(state, rng.uniform());
            t += cell.time;
            if (cell.to == target) {
                double mu = static_cast<double>(t);
                value[0] = 1.0;
                value[1] = mu;
                value[2] = mu * mu;
                value[3] = mu * mu * mu;
                break;
            }
            if (cell.to == 0) break; // absorbed first: contributes zero
            state = cell.to;
            if (t > step_guard) {
                est.censored++;
                break;
            }
        }
        for (int r = 0; r < 4; ++r) {
            sum[r] += value[r];
            sumsq[r] += value[r] * value[r];
        }
    }
    for (int r = 0; r < 4; ++r) {
        double m = sum[r] / cfg.trials;
        double var = std::max(0.0, sumsq[r] / cfg.trials - m * m);
        est.mean[r] = m;
        est.se[r] = std::sqrt(var / cfg.trials);
    }
    return est;
}

} // namespace semimarkov
