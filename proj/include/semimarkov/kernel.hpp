#pragma once

// Perturbed semi-Markov transition kernels on states {0, 1, ..., N}.
//
// State 0 is absorbing; states 1..N form the communicating part. An entry
// Q_ij(k) is the joint probability, from state i, of jumping to state j
// with transition time k >= 1. Each entry depends on the perturbation
// parameter as a polynomial with real coefficients, valid on [0, eps_max],
// and the time support is finite. Row sums must be identically one as
// polynomials, which is what keeps every moment used downstream an exact
// polynomial in the perturbation parameter.
//
// Matrix conventions used throughout the library:
//   * full moment matrices are N x (N+1): row r is state r+1, column c is
//     state c (column 0 = absorbing state);
//   * taboo matrices are N x N over states 1..N: row r / column c are
//     states r+1 / c+1.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "semimarkov/errors.hpp"
#include "semimarkov/matrix.hpp"

namespace semimarkov {

struct Polynomial {
    std::vector<double> coeffs; // ascending powers; kept verbatim for round-trips

    double eval(double x) const {
        if (coeffs.empty()) return 0.0;
        double v = coeffs.back();
        for (std::size_t i = coeffs.size() - 1; i-- > 0;)
            v = coeffs[i] + x * v;
        return v;
    }

    double coeff(std::size_t m) const { return m < coeffs.size() ? coeffs[m] : 0.0; }
    std::size_t size() const { return coeffs.size(); }
};

struct KernelEntry {
    int from;        // 1..N
    int to;          // 0..N
    int time;        // >= 1
    Polynomial poly; // Q_{from,to}(time) as a function of the perturbation
};

struct KernelOptions {
    int stochasticity_grid = 101; // eps grid density for range checks
    double tolerance = 1e-12;
};

// Kernel values frozen at one perturbation value, laid out densely for the
// dynamic programs and the simulator.
struct KernelAtEps {
    int num_states = 0; // N
    int max_time = 0;   // K
    double eps = 0.0;
    std::vector<double> q; // [(i-1)*(N+1)+j]*K + (k-1)

    double value(int from, int to, int time) const {
        if (time < 1 || time > max_time) return 0.0;
        return q[(static_cast<std::size_t>(from - 1) * (num_states + 1) + to) *
                     static_cast<std::size_t>(max_time) +
                 static_cast<std::size_t>(time - 1)];
    }

    // P{ sojourn in state `from` > u }, destinations marginalized out
    double sojourn_tail(int from, int u) const {
        if (u < 0) return 1.0;
        if (u >= max_time) return 0.0;
        return sojourn_tails[static_cast<std::size_t>(from - 1) * (max_time + 1) +
                             static_cast<std::size_t>(u)];
    }

    std::vector<double> sojourn_tails; // [(i-1)*(K+1) + u], u = 0..K
};

class PerturbedKernel {
  public:
    PerturbedKernel(int num_states, double eps_max, std::vector<KernelEntry> entries,
                    const KernelOptions& opts = {})
        : num_states_(num_states), eps_max_(eps_max), entries_(std::move(entries)) {
        check_schema();
        std::sort(entries_.begin(), entries_.end(), [](const KernelEntry& a, const KernelEntry& b) {
            return std::tie(a.from, a.to, a.time) < std::tie(b.from, b.to, b.time);
        });
        for (const KernelEntry& e : entries_) max_time_ = std::max(max_time_, e.time);
        check_stochasticity(opts);
    }

    int num_states() const { return num_states_; }
    double eps_max() const { return eps_max_; }
    int max_time() const { return max_time_; }
    const std::vector<KernelEntry>& entries() const { return entries_; }

    double value(int from, int to, int time, double eps) const {
        for (const KernelEntry& e : entries_)
            if (e.from == from && e.to == to && e.time == time) return e.poly.eval(eps);
        return 0.0;
    }

    // outgoing law of the absorbing state; fixed so that return times are
    // proper regeneration times, never used by any dynamics in here
    double absorbing_row_value(int /*to*/, int time) const {
        return time == 1 ? 1.0 / (num_states_ + 1) : 0.0;
    }

    KernelAtEps at(double eps) const {
        require_eps(eps);
        KernelAtEps k;
        k.num_states = num_states_;
        k.max_time = max_time_;
        k.eps = eps;
        k.q.assign(static_cast<std::size_t>(num_states_) * (num_states_ + 1) * max_time_, 0.0);
        for (const KernelEntry& e : entries_) {
            k.q[(static_cast<std::size_t>(e.from - 1) * (num_states_ + 1) + e.to) *
                    static_cast<std::size_t>(max_time_) +
                static_cast<std::size_t>(e.time - 1)] = e.poly.eval(eps);
        }
        k.sojourn_tails.assign(static_cast<std::size_t>(num_states_) * (max_time_ + 1), 0.0);
        for (int i = 1; i <= num_states_; ++i) {
            double cum = 0.0;
            k.sojourn_tails[static_cast<std::size_t>(i - 1) * (max_time_ + 1)] = 1.0;
            for (int t = 1; t <= max_time_; ++t) {
                for (int j = 0; j <= num_states_; ++j) cum += k.value(i, j, t);
                k.sojourn_tails[static_cast<std::size_t>(i - 1) * (max_time_ + 1) + t] = 1.0 - cum;
            }
        }
        return k;
    }

    // embedded jump-chain transition matrix p_ij = sum_k Q_ij(k), N x (N+1)
    Matrix<double> embedded_matrix(double eps) const {
        require_eps(eps);
        Matrix<double> p(static_cast<std::size_t>(num_states_),
                         static_cast<std::size_t>(num_states_) + 1, 0.0);
        for (const KernelEntry& e : entries_)
            p(static_cast<std::size_t>(e.from - 1), static_cast<std::size_t>(e.to)) +=
                e.poly.eval(eps);
        return p;
    }

    void require_eps(double eps) const {
        if (!(eps >= 0.0 && eps <= eps_max_)) {
            std::ostringstream os;
            os << "eps=" << eps << " outside the declared validity interval [0, " << eps_max_ << "]";
            throw SchemaError(os.str());
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["num_states"] = num_states_;
        j["eps_max"] = eps_max_;
        j["entries"] = nlohmann::json::array();
        for (const KernelEntry& e : entries_) {
            nlohmann::json je;
            je["from"] = e.from;
            je["to"] = e.to;
            je["time"] = e.time;
            je["poly"] = e.poly.coeffs;
            j["entries"].push_back(je);
        }
        return j;
    }

    static PerturbedKernel from_json(const nlohmann::json& j, const KernelOptions& opts = {}) {
        if (!j.is_object() || !j.contains("num_states") || !j.contains("eps_max") ||
            !j.contains("entries"))
            throw SchemaError("model file must be an object with num_states, eps_max, entries");
        if (!j["num_states"].is_number_integer())
            throw SchemaError("num_states must be an integer");
        int n = j["num_states"].get<int>();
        double eps_max = j["eps_max"].get<double>();
        if (!j["entries"].is_array()) throw SchemaError("entries must be an array");
        std::vector<KernelEntry> entries;
        for (const auto& je : j["entries"]) {
            if (!je.contains("from") || !je.contains("to") || !je.contains("time") ||
                !je.contains("poly"))
                throw SchemaError("each entry needs from, to, time, poly");
            KernelEntry e;
            e.from = je["from"].get<int>();
            e.to = je["to"].get<int>();
            e.time = je["time"].get<int>();
            if (!je["poly"].is_array()) throw SchemaError("poly must be an array of coefficients");
            e.poly.coeffs = je["poly"].get<std::vector<double>>();
            entries.push_back(std::move(e));
        }
        return PerturbedKernel(n, eps_max, std::move(entries), opts);
    }

  private:
    int num_states_;
    double eps_max_;
    std::vector<KernelEntry> entries_;
    int max_time_ = 0;

    void check_schema() const {
        if (num_states_ < 1) throw SchemaError("num_states must be >= 1");
        if (!(eps_max_ > 0.0)) throw SchemaError("eps_max must be > 0");
        std::map<std::tuple<int, int, int>, int> seen;
        for (const KernelEntry& e : entries_) {
            if (e.from < 1 || e.from > num_states_)
                throw SchemaError("entry from=" + std::to_string(e.from) +
                                  " outside 1.." + std::to_string(num_states_));
            if (e.to < 0 || e.to > num_states_)
                throw SchemaError("entry to=" + std::to_string(e.to) + " outside 0.." +
                                  std::to_string(num_states_));
            if (e.time < 1)
                throw SchemaError("entry time=" + std::to_string(e.time) +
                                  " invalid: transition times start at 1");
            if (++seen[{e.from, e.to, e.time}] > 1)
                throw SchemaError("duplicate entry (" + std::to_string(e.from) + "," +
                                  std::to_string(e.to) + "," + std::to_string(e.time) + ")");
        }
    }

    // Row sums must be identically 1 on [0, eps_max]. A polynomial is
    // identically 1 on an interval iff its coefficient list is (1, 0, ...),
    // so the sum check is exact on coefficients; entry ranges are checked on
    // a grid since interval positivity is not a coefficient condition.
    void check_stochasticity(const KernelOptions& opts) const {
        for (int i = 1; i <= num_states_; ++i) {
            std::vector<double> rowsum;
            for (const KernelEntry& e : entries_) {
                if (e.from != i) continue;
                if (rowsum.size() < e.poly.size()) rowsum.resize(e.poly.size(), 0.0);
                for (std::size_t m = 0; m < e.poly.size(); ++m) rowsum[m] += e.poly.coeffs[m];
            }
            if (rowsum.empty())
                throw SchemaError("row " + std::to_string(i) + " has no entries");
            for (std::size_t m = 0; m < rowsum.size(); ++m) {
                double want = m == 0 ? 1.0 : 0.0;
                if (std::fabs(rowsum[m] - want) > opts.tolerance) {
                    std::ostringstream os;
                    os << "row " << i << " sum is not identically 1: coefficient of eps^" << m
                       << " is " << rowsum[m];
                    throw SchemaError(os.str());
                }
            }
        }
        int grid = std::max(2, opts.stochasticity_grid);
        for (int g = 0; g < grid; ++g) {
            double eps = eps_max_ * static_cast<double>(g) / (grid - 1);
            for (const KernelEntry& e : entries_) {
                double v = e.poly.eval(eps);
                if (v < -opts.tolerance || v > 1.0 + opts.tolerance) {
                    std::ostringstream os;
                    os << "entry (" << e.from << "," << e.to << "," << e.time << ") = " << v
                       << " outside [0,1] at eps=" << eps;
                    throw SchemaError(os.str());
                }
            }
        }
    }
};

inline PerturbedKernel load_kernel(const std::string& path, const KernelOptions& opts = {}) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("model file " + path + " is not valid JSON: " + e.what());
    }
    return PerturbedKernel::from_json(j, opts);
}

inline void save_kernel(const PerturbedKernel& kernel, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write model file: " + path);
    out << kernel.to_json().dump(2) << "\n";
}

} // namespace semimarkov
