#pragma once

// Machine- and human-readable output for the command-line front end. JSON
// payloads round-trip exactly (parse(render(x)) == x); every emitted file
// embeds the manifest of the run that produced it. Human tables shorten
// floats to six significant digits, machine formats keep full precision.

#include <cstdio>
#include <ctime>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semimarkov/expansion.hpp"
#include "semimarkov/kernel.hpp"
#include "semimarkov/simulate.hpp"
#include "semimarkov/validate.hpp"

namespace semimarkov {

inline const char* tool_version() { return "0.1.0"; }

struct RunManifest {
    std::string command;
    std::string model_path;
    nlohmann::json parameters = nlohmann::json::object();
    std::string version = tool_version();
    std::string timestamp;

    static std::string now_utc() {
        std::time_t t = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
        return buf;
    }
};

inline nlohmann::json to_json(const RunManifest& m) {
    return {{"command", m.command},
            {"model", m.model_path},
            {"parameters", m.parameters},
            {"version", m.version},
            {"timestamp", m.timestamp}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.model_path = j.at("model").get<std::string>();
    m.parameters = j.at("parameters");
    m.version = j.at("version").get<std::string>();
    m.timestamp = j.at("timestamp").get<std::string>();
    return m;
}

inline std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ---- validation report ----

inline nlohmann::json to_json(const ValidationReport& r) {
    nlohmann::json j;
    j["condition_A"] = r.condition_A;
    j["condition_B"] = r.condition_B;
    j["condition_C"] = r.condition_C;
    j["condition_E"] = r.condition_E;
    j["reachability"] = r.reachability;
    j["beta"] = r.beta;
    j["beta_witness"] = r.beta_witness;
    j["witness_state"] = r.witness_state;
    j["rho_abscissa"] = r.rho_abscissa;
    j["periods"] = r.periods;
    j["messages"] = r.messages;
    return j;
}

inline ValidationReport validation_from_json(const nlohmann::json& j) {
    ValidationReport r;
    r.condition_A = j.at("condition_A").get<bool>();
    r.condition_B = j.at("condition_B").get<bool>();
    r.condition_C = j.at("condition_C").get<bool>();
    r.condition_E = j.at("condition_E").get<bool>();
    r.reachability = j.at("reachability").get<std::vector<std::vector<bool>>>();
    r.beta = j.at("beta").get<double>();
    r.beta_witness = j.at("beta_witness").get<double>();
    r.witness_state = j.at("witness_state").get<int>();
    r.rho_abscissa = j.at("rho_abscissa").get<double>();
    r.periods = j.at("periods").get<std::vector<int>>();
    r.messages = j.at("messages").get<std::vector<std::string>>();
    return r;
}

inline bool operator==(const ValidationReport& a, const ValidationReport& b) {
    return a.condition_A == b.condition_A && a.condition_B == b.condition_B &&
           a.condition_C == b.condition_C && a.condition_E == b.condition_E &&
           a.reachability == b.reachability && a.beta == b.beta &&
           a.beta_witness == b.beta_witness && a.witness_state == b.witness_state &&
           a.rho_abscissa == b.rho_abscissa && a.periods == b.periods && a.messages == b.messages;
}

// ---- expansion report ----

inline nlohmann::json to_json(const RootExpansion& rx) {
    nlohmann::json j;
    j["rho0"] = rx.rho0;
    std::vector<double> c(rx.c.begin() + 1, rx.c.end()); // c_1..c_k
    j["c"] = c;
    std::vector<std::vector<double>> pi(rx.pi_tilde.rows());
    for (std::size_t i = 0; i < rx.pi_tilde.rows(); ++i)
        for (std::size_t k2 = 0; k2 < rx.pi_tilde.cols(); ++k2)
            pi[i].push_back(rx.pi_tilde(i, k2));
    j["pi_tilde"] = pi;
    j["regime"] = rx.pseudo_stationary ? "pseudo-stationary" : "quasi-stationary";
    j["order"] = rx.order;
    j["reference_state"] = rx.reference_state;
    j["b_table"] = rx.b;
    j["diagnostics"] = {{"root_residual", rx.root_residual},
                        {"root_spread", rx.root_spread},
                        {"rho_abscissa", rx.rho_abscissa}};
    return j;
}

inline RootExpansion expansion_from_json(const nlohmann::json& j) {
    RootExpansion rx;
    rx.rho0 = j.at("rho0").get<double>();
    std::vector<double> c = j.at("c").get<std::vector<double>>();
    rx.c.assign(1, 0.0);
    rx.c.insert(rx.c.end(), c.begin(), c.end());
    auto pi = j.at("pi_tilde").get<std::vector<std::vector<double>>>();
    std::size_t n = pi.size();
    rx.pi_tilde = Matrix<double>(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k2 = 0; k2 < n; ++k2) rx.pi_tilde(i, k2) = pi[i][k2];
    rx.pseudo_stationary = j.at("regime").get<std::string>() == "pseudo-stationary";
    rx.order = j.at("order").get<int>();
    rx.reference_state = j.at("reference_state").get<int>();
    rx.b = j.at("b_table").get<std::vector<std::vector<double>>>();
    rx.root_residual = j.at("diagnostics").at("root_residual").get<double>();
    rx.root_spread = j.at("diagnostics").at("root_spread").get<double>();
    rx.rho_abscissa = j.at("diagnostics").at("rho_abscissa").get<double>();
    return rx;
}

inline bool operator==(const RootExpansion& a, const RootExpansion& b) {
    if (a.rho0 != b.rho0 || a.c != b.c || a.pseudo_stationary != b.pseudo_stationary ||
        a.order != b.order || a.reference_state != b.reference_state || a.b != b.b ||
        a.root_residual != b.root_residual || a.root_spread != b.root_spread ||
        a.rho_abscissa != b.rho_abscissa)
        return false;
    if (a.pi_tilde.rows() != b.pi_tilde.rows() || a.pi_tilde.cols() != b.pi_tilde.cols())
        return false;
    for (std::size_t i = 0; i < a.pi_tilde.rows(); ++i)
        for (std::size_t j2 = 0; j2 < a.pi_tilde.cols(); ++j2)
            if (a.pi_tilde(i, j2) != b.pi_tilde(i, j2)) return false;
    return true;
}

// ---- simulation report ----

inline nlohmann::json to_json(const SimEstimate& e) {
    return {{"p_hat", e.p_hat}, {"se", e.se},       {"absorbed_hat", e.absorbed_hat},
            {"counts", e.counts}, {"trials", e.trials}, {"seed", e.seed}};
}

inline SimEstimate sim_from_json(const nlohmann::json& j) {
    SimEstimate e;
    e.p_hat = j.at("p_hat").get<std::vector<double>>();
    e.se = j.at("se").get<std::vector<double>>();
    e.absorbed_hat = j.at("absorbed_hat").get<double>();
    e.counts = j.at("counts").get<std::vector<long long>>();
    e.trials = j.at("trials").get<long long>();
    e.seed = j.at("seed").get<std::uint64_t>();
    return e;
}

inline bool operator==(const SimEstimate& a, const SimEstimate& b) {
    return a.p_hat == b.p_hat && a.se == b.se && a.absorbed_hat == b.absorbed_hat &&
           a.counts == b.counts && a.trials == b.trials && a.seed == b.seed;
}

// ---- verification table ----

struct VerifyRow {
    double eps;
    long long n;
    int i, j;
    double predicted;
    double oracle;
    double ratio;
};

inline nlohmann::json to_json(const std::vector<VerifyRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows)
        arr.push_back({{"eps", r.eps},
                       {"n", r.n},
                       {"i", r.i},
                       {"j", r.j},
                       {"predicted", r.predicted},
                       {"oracle", r.oracle},
                       {"ratio", r.ratio}});
    return arr;
}

inline std::vector<VerifyRow> verify_rows_from_json(const nlohmann::json& arr) {
    std::vector<VerifyRow> rows;
    for (const auto& j : arr)
        rows.push_back({j.at("eps").get<double>(), j.at("n").get<long long>(),
                        j.at("i").get<int>(), j.at("j").get<int>(),
                        j.at("predicted").get<double>(), j.at("oracle").get<double>(),
                        j.at("ratio").get<double>()});
    return rows;
}

inline bool operator==(const VerifyRow& a, const VerifyRow& b) {
    return a.eps == b.eps && a.n == b.n && a.i == b.i && a.j == b.j &&
           a.predicted == b.predicted && a.oracle == b.oracle && a.ratio == b.ratio;
}

inline std::string verify_csv(const std::vector<VerifyRow>& rows, const RunManifest& m) {
    std::ostringstream os;
    os << "# manifest: " << to_json(m).dump() << "\n";
    os << "eps,n,i,j,predicted,oracle,ratio\n";
    for (const auto& r : rows)
        os << fmt_full(r.eps) << "," << r.n << "," << r.i << "," << r.j << ","
           << fmt_full(r.predicted) << "," << fmt_full(r.oracle) << "," << fmt_full(r.ratio)
           << "\n";
    return os.str();
}

// ---- oracle CSV dump ----

inline std::string renewal_csv(const RenewalSolution& sol, const RunManifest& m) {
    std::ostringstream os;
    os << "# manifest: " << to_json(m).dump() << "\n";
    os << "n,g";
    for (std::size_t j = 0; j < sol.h.size(); ++j) os << ",h_" << j + 1;
    for (std::size_t j = 0; j < sol.p.size(); ++j) os << ",P_" << j + 1;
    os << ",absorbed\n";
    for (int n = 0; n <= sol.horizon; ++n) {
        os << n << "," << fmt_full(sol.g[static_cast<std::size_t>(n)]);
        for (const auto& h : sol.h) os << "," << fmt_full(h[static_cast<std::size_t>(n)]);
        for (const auto& p : sol.p) os << "," << fmt_full(p[static_cast<std::size_t>(n)]);
        os << "," << fmt_full(sol.absorbed[static_cast<std::size_t>(n)]) << "\n";
    }
    return os.str();
}

} // namespace semimarkov
