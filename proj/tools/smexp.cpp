// smexp: survival asymptotics for perturbed semi-Markov chains with one
// absorbing state. Subcommands:
//
//   validate   check the standing conditions on a model file
//   expand     decay exponent, expansion coefficients, occupation limits
//   verify     compare long-time predictions against the exact solver
//   simulate   Monte Carlo estimates with oracle deltas
//   oracle     dump the exact g / h / P arrays as CSV
//
// Exit codes: 0 success, 1 condition or verification failure, 2 usage
// error, 3 numerical fault.

#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "semimarkov/semimarkov.hpp"

namespace sm = semimarkov;

namespace {

struct CommonOpts {
    std::string model;
    std::string out;
    std::string format = "table";
};

void emit(const CommonOpts& c, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(c.out);
    if (!f) throw sm::SchemaError("cannot write output file: " + c.out);
    f << text;
}

sm::RunManifest make_manifest(const std::string& command, const CommonOpts& c,
                              nlohmann::json params) {
    sm::RunManifest m;
    m.command = command;
    m.model_path = c.model;
    m.parameters = std::move(params);
    m.timestamp = sm::RunManifest::now_utc();
    return m;
}

std::string json_payload(const nlohmann::json& body, const sm::RunManifest& m) {
    nlohmann::json j = body;
    j["manifest"] = sm::to_json(m);
    return j.dump(2) + "\n";
}

int run_validate(const CommonOpts& c) {
    if (c.format == "csv") throw sm::SchemaError("validate has no csv form; use json or table");
    sm::PerturbedKernel kernel = sm::load_kernel(c.model);
    sm::ValidationReport rep = sm::validate_model(kernel);
    sm::RunManifest man = make_manifest("validate", c, {});
    if (c.format == "json") {
        emit(c, json_payload(sm::to_json(rep), man));
    } else {
        std::ostringstream os;
        auto line = [&](const char* name, bool ok) {
            os << "  " << name << ": " << (ok ? "pass" : "FAIL") << "\n";
        };
        os << "conditions\n";
        line("A (continuity at the limit)", rep.condition_A);
        line("B (communication avoiding absorption)", rep.condition_B);
        line("C (exponential moment margin)", rep.condition_C);
        line("E (aperiodic return times)", rep.condition_E);
        os << "  rho_abscissa: " << sm::fmt_short(rep.rho_abscissa) << "\n";
        if (rep.condition_C)
            os << "  witness: phi_" << rep.witness_state << rep.witness_state << "("
               << sm::fmt_short(rep.beta_witness) << ") > 1\n";
        os << "  periods:";
        for (int d : rep.periods) os << " " << d;
        os << "\n";
        for (const auto& msg : rep.messages) os << "  - " << msg << "\n";
        emit(c, os.str());
    }
    return rep.all_pass() ? 0 : 1;
}

int run_expand(const CommonOpts& c, int order, int ref_state, bool rational) {
    if (c.format == "csv") throw sm::SchemaError("expand has no csv form; use json or table");
    sm::PerturbedKernel kernel = sm::load_kernel(c.model);
    sm::ValidationReport rep = sm::validate_model(kernel);
    if (!rep.all_pass()) {
        std::cerr << "model fails standing conditions:";
        if (!rep.condition_B) std::cerr << " B";
        if (!rep.condition_C) std::cerr << " C";
        if (!rep.condition_E) std::cerr << " E";
        std::cerr << "\n";
        return 1;
    }
    sm::ExpansionOptions opts;
    opts.reference_state = ref_state;
    sm::RootExpansion rx = sm::compute_expansion(kernel, order, opts);
    nlohmann::json body = sm::to_json(rx);
    std::ostringstream table;
    table << "regime: " << (rx.pseudo_stationary ? "pseudo-stationary" : "quasi-stationary")
          << "\n";
    table << "rho0: " << sm::fmt_full(rx.rho0) << "\n";
    for (int n2 = 1; n2 <= rx.order; ++n2)
        table << "c_" << n2 << ": " << sm::fmt_full(rx.c[static_cast<std::size_t>(n2)]) << "\n";
    if (rational) {
        sm::RationalExpansion rex = sm::compute_expansion_rational(kernel, order, opts);
        nlohmann::json jr;
        jr["w"] = rex.w.to_string();
        std::vector<std::string> cs;
        for (int n2 = 1; n2 <= order; ++n2) cs.push_back(rex.c[static_cast<std::size_t>(n2)].to_string());
        jr["c"] = cs;
        body["rational"] = jr;
        for (int n2 = 1; n2 <= order; ++n2)
            table << "c_" << n2 << " (exact): " << rex.c[static_cast<std::size_t>(n2)].to_string()
                  << "\n";
    }
    table << "pi_tilde (rows: start state):\n";
    for (std::size_t i = 0; i < rx.pi_tilde.rows(); ++i) {
        table << " ";
        for (std::size_t j = 0; j < rx.pi_tilde.cols(); ++j)
            table << " " << sm::fmt_short(rx.pi_tilde(i, j));
        table << "\n";
    }
    table << "diagnostics: residual " << sm::fmt_short(rx.root_residual) << ", root spread "
          << sm::fmt_short(rx.root_spread) << ", abscissa " << sm::fmt_short(rx.rho_abscissa)
          << "\n";
    sm::RunManifest man = make_manifest(
        "expand", c, {{"order", order}, {"reference_state", ref_state}, {"rational", rational}});
    emit(c, c.format == "json" ? json_payload(body, man) : table.str());
    return 0;
}

int run_verify(const CommonOpts& c, int order, int r, double lambda, std::vector<double> eps_grid,
               double tol, long long horizon_cap) {
    sm::PerturbedKernel kernel = sm::load_kernel(c.model);
    sm::RootExpansion rx = sm::compute_expansion(kernel, order);
    if (r < 1 || r > order) throw sm::SchemaError("verify: --r must lie in 1..order");
    std::sort(eps_grid.begin(), eps_grid.end(), std::greater<double>());
    std::vector<sm::VerifyRow> rows;
    std::vector<double> errs;
    const int n_states = kernel.num_states();
    for (double eps : eps_grid) {
        double n_real = std::floor(lambda / std::pow(eps, r));
        long long n = static_cast<long long>(n_real);
        if (n > horizon_cap) {
            std::ostringstream os;
            os << "verify: eps=" << eps << " needs horizon n=" << n
               << " beyond the solver cap " << horizon_cap;
            throw sm::ConvergenceError(os.str());
        }
        sm::KernelAtEps k = kernel.at(eps);
        int horizon = std::max<long long>(n, kernel.max_time());
        std::vector<std::vector<double>> p;
        if (horizon <= 4096) {
            p = sm::renewal_solve(k, 1, horizon).p; // dual-route checked
        } else {
            p = sm::survival_direct(k, 1, static_cast<int>(horizon), nullptr);
        }
        double err = 0.0;
        for (int i = 1; i <= n_states; ++i) {
            std::vector<std::vector<double>> pi =
                i == 1 ? p
                       : (horizon <= 4096 ? sm::renewal_solve(k, i, horizon).p
                                          : sm::survival_direct(k, i, static_cast<int>(horizon),
                                                                nullptr));
            for (int j = 1; j <= n_states; ++j) {
                double oracle = pi[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(n)];
                double predicted = sm::asymptotic_predict(rx, i, j, eps, static_cast<double>(n), r);
                double ratio = oracle / predicted;
                rows.push_back({eps, n, i, j, predicted, oracle, ratio});
                err = std::max(err, std::fabs(ratio - 1.0));
            }
        }
        errs.push_back(err);
    }
    bool monotone = true;
    for (std::size_t i = 1; i < errs.size(); ++i)
        if (errs[i] > errs[i - 1] * (1.0 + 1e-9)) monotone = false;
    bool within = errs.empty() ? false : errs.back() <= tol;
    sm::RunManifest man = make_manifest("verify", c,
                                        {{"order", order},
                                         {"r", r},
                                         {"lambda", lambda},
                                         {"eps", eps_grid},
                                         {"tol", tol}});
    if (c.format == "json") {
        nlohmann::json body;
        body["rows"] = sm::to_json(rows);
        body["max_rel_err"] = errs;
        body["monotone"] = monotone;
        body["within_tolerance"] = within;
        emit(c, json_payload(body, man));
    } else if (c.format == "csv") {
        emit(c, sm::verify_csv(rows, man));
    } else {
        std::ostringstream os;
        os << "eps        n        i j  predicted    oracle       ratio\n";
        for (const auto& row : rows) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "%-10s %-8lld %d %d  %-12s %-12s %s\n",
                          sm::fmt_short(row.eps).c_str(), row.n, row.i, row.j,
                          sm::fmt_short(row.predicted).c_str(), sm::fmt_short(row.oracle).c_str(),
                          sm::fmt_short(row.ratio).c_str());
            os << buf;
        }
        os << "max |ratio-1| per eps:";
        for (double e : errs) os << " " << sm::fmt_short(e);
        os << "\nmonotone: " << (monotone ? "yes" : "no") << ", final within tol " << tol << ": "
           << (within ? "yes" : "no") << "\n";
        emit(c, os.str());
    }
    return monotone && within ? 0 : 1;
}

int run_simulate(const CommonOpts& c, const sm::SimConfig& cfg) {
    sm::PerturbedKernel kernel = sm::load_kernel(c.model);
    sm::SimEstimate est = sm::simulate(kernel, cfg);
    int horizon = std::max<long long>(cfg.horizon, kernel.max_time());
    sm::RenewalSolution sol = sm::renewal_solve(kernel, cfg.eps, cfg.initial_state, horizon);
    const int n_states = kernel.num_states();
    bool ok = true;
    std::vector<double> oracle(static_cast<std::size_t>(n_states));
    for (int j = 0; j < n_states; ++j) {
        double truth = sol.p[static_cast<std::size_t>(j)][static_cast<std::size_t>(cfg.horizon)];
        oracle[static_cast<std::size_t>(j)] = truth;
        double delta = std::fabs(est.p_hat[static_cast<std::size_t>(j)] - truth);
        // empty cells have zero empirical se; the oracle value gives the
        // binomial width to test against instead
        double se = std::max(est.se[static_cast<std::size_t>(j)],
                             std::sqrt(truth * (1.0 - truth) / cfg.trials));
        if (delta > 4.0 * se + 1e-15) ok = false;
    }
    sm::RunManifest man = make_manifest("simulate", c,
                                        {{"eps", cfg.eps},
                                         {"initial", cfg.initial_state},
                                         {"horizon", cfg.horizon},
                                         {"trials", cfg.trials},
                                         {"seed", cfg.seed}});
    if (c.format == "json") {
        nlohmann::json body = sm::to_json(est);
        body["oracle"] = oracle;
        body["within_4se"] = ok;
        emit(c, json_payload(body, man));
    } else if (c.format == "csv") {
        std::ostringstream os;
        os << "# manifest: " << sm::to_json(man).dump() << "\n";
        os << "state,p_hat,se,oracle\n";
        for (int j = 0; j < n_states; ++j)
            os << j + 1 << "," << sm::fmt_full(est.p_hat[static_cast<std::size_t>(j)]) << ","
               << sm::fmt_full(est.se[static_cast<std::size_t>(j)]) << ","
               << sm::fmt_full(oracle[static_cast<std::size_t>(j)]) << "\n";
        emit(c, os.str());
    } else {
        std::ostringstream os;
        os << "state  p_hat        se           oracle       |delta|/se\n";
        for (int j = 0; j < n_states; ++j) {
            double se = est.se[static_cast<std::size_t>(j)];
            double delta = std::fabs(est.p_hat[static_cast<std::size_t>(j)] -
                                     oracle[static_cast<std::size_t>(j)]);
            char buf[160];
            std::snprintf(buf, sizeof buf, "%-6d %-12s %-12s %-12s %s\n", j + 1,
                          sm::fmt_short(est.p_hat[static_cast<std::size_t>(j)]).c_str(),
                          sm::fmt_short(se).c_str(),
                          sm::fmt_short(oracle[static_cast<std::size_t>(j)]).c_str(),
                          se > 0 ? sm::fmt_short(delta / se).c_str() : "-");
            os << buf;
        }
        os << "absorbed: " << sm::fmt_short(est.absorbed_hat) << ", all within 4 se: "
           << (ok ? "yes" : "no") << "\n";
        emit(c, os.str());
    }
    return ok ? 0 : 1;
}

int run_oracle(const CommonOpts& c, double eps, long long horizon, int initial) {
    sm::PerturbedKernel kernel = sm::load_kernel(c.model);
    int h = static_cast<int>(std::max<long long>(horizon, kernel.max_time()));
    sm::RenewalSolution sol = sm::renewal_solve(kernel, eps, initial, h);
    sm::RunManifest man = make_manifest(
        "oracle", c, {{"eps", eps}, {"horizon", horizon}, {"initial", initial}});
    emit(c, sm::renewal_csv(sol, man));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"survival asymptotics for perturbed semi-Markov chains"};
    app.require_subcommand(1);

    CommonOpts copt;
    int order = 3, ref_state = 1, r = 1;
    bool rational = false;
    double lambda = 1.0, tol = 0.05;
    std::vector<double> eps_grid = {0.04, 0.02, 0.01};
    long long horizon_cap = 1 << 16;
    sm::SimConfig cfg;
    double oracle_eps = 0.0;
    long long oracle_horizon = 200;
    int oracle_initial = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--model", copt.model, "model file (JSON)")->required();
        sub->add_option("--out", copt.out, "write output to this path instead of stdout");
        sub->add_option("--format", copt.format, "output format")
            ->check(CLI::IsMember({"json", "csv", "table"}));
    };

    CLI::App* validate = app.add_subcommand("validate", "check standing conditions");
    add_common(validate);

    CLI::App* expand = app.add_subcommand("expand", "expansion of the decay exponent");
    add_common(expand);
    expand->add_option("--order", order, "expansion order k");
    expand->add_option("--ref-state", ref_state, "reference state for the coefficient table");
    expand->add_flag("--rational", rational, "also run the exact-rational backend");

    CLI::App* verify = app.add_subcommand("verify", "predictions vs exact solver");
    add_common(verify);
    verify->add_option("--order", order, "expansion order k");
    verify->add_option("--r", r, "balance order (n grows like lambda/eps^r)");
    verify->add_option("--lambda", lambda, "balance constant");
    verify->add_option("--eps", eps_grid, "perturbation grid")->delimiter(',');
    verify->add_option("--tol", tol, "required final relative error");
    verify->add_option("--horizon", horizon_cap, "solver horizon cap");

    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo with oracle deltas");
    add_common(simulate);
    simulate->add_option("--eps", cfg.eps, "perturbation value")->required();
    simulate->add_option("--horizon", cfg.horizon, "time horizon n");
    simulate->add_option("--trials", cfg.trials, "number of trajectories");
    simulate->add_option("--seed", cfg.seed, "base seed");
    simulate->add_option("--initial", cfg.initial_state, "initial state");

    CLI::App* oracle = app.add_subcommand("oracle", "dump exact arrays as CSV");
    add_common(oracle);
    oracle->add_option("--eps", oracle_eps, "perturbation value")->required();
    oracle->add_option("--horizon", oracle_horizon, "time horizon");
    oracle->add_option("--initial", oracle_initial, "initial (renewal) state");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(validate)) return run_validate(copt);
        if (app.got_subcommand(expand)) return run_expand(copt, order, ref_state, rational);
        if (app.got_subcommand(verify))
            return run_verify(copt, order, r, lambda, eps_grid, tol, horizon_cap);
        if (app.got_subcommand(simulate)) return run_simulate(copt, cfg);
        if (app.got_subcommand(oracle))
            return run_oracle(copt, oracle_eps, oracle_horizon, oracle_initial);
    } catch (const sm::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical fault: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
