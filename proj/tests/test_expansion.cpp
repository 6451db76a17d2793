#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "semimarkov/expansion.hpp"
#include "semimarkov/renewal.hpp"

#include "random_kernels.hpp"

using namespace semimarkov;

namespace {

std::string model_path(const char* name) { return std::string(SM_MODEL_DIR) + "/" + name; }

double loglog_slope(const std::vector<double>& eps, const std::vector<double>& err,
                    double floor_val = 1e-14) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < eps.size(); ++i)
        if (err[i] > floor_val) {
            x.push_back(std::log(eps[i]));
            y.push_back(std::log(err[i]));
        }
    if (x.size() < 2) return 1e9;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double n = static_cast<double>(x.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// brute-force enumeration over bounded boxes, as an independent oracle for
// the constrained-tuple sets
std::vector<std::vector<int>> brute_Dmq(int m, int q) {
    std::vector<std::vector<int>> out;
    std::vector<int> t(static_cast<std::size_t>(q - 1), 0);
    while (true) {
        int count = 0, weight = 0;
        for (int p = 1; p <= q - 1; ++p) {
            count += t[static_cast<std::size_t>(p - 1)];
            weight += p * t[static_cast<std::size_t>(p - 1)];
        }
        if (count == m && weight == q) out.push_back(t);
        int pos = 0;
        while (pos < q - 1) {
            if (++t[static_cast<std::size_t>(pos)] <= q) break;
            t[static_cast<std::size_t>(pos)] = 0;
            ++pos;
        }
        if (pos == q - 1) break;
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

TEST_CASE("Dmq: hand cases") {
    CHECK(enumerate_Dmq(2, 2).solutions == std::vector<std::vector<int>>{{2}});
    CHECK(enumerate_Dmq(2, 3).solutions == std::vector<std::vector<int>>{{1, 1}});
    CHECK(enumerate_Dmq(3, 3).solutions == std::vector<std::vector<int>>{{3, 0}});
    CHECK_THROWS(enumerate_Dmq(1, 2));
    CHECK_THROWS(enumerate_Dmq(3, 2));
}

TEST_CASE("Dmq: tuples satisfy the defining system; matches brute force") {
    for (int q = 2; q <= 7; ++q)
        for (int m = 2; m <= q; ++m) {
            Dmq d = enumerate_Dmq(m, q);
            for (const auto& t : d.solutions) {
                REQUIRE(t.size() == static_cast<std::size_t>(q - 1));
                int count = 0, weight = 0;
                for (int p = 1; p <= q - 1; ++p) {
                    CHECK(t[static_cast<std::size_t>(p - 1)] >= 0);
                    count += t[static_cast<std::size_t>(p - 1)];
                    weight += p * t[static_cast<std::size_t>(p - 1)];
                }
                CHECK(count == m);
                CHECK(weight == q);
            }
            CHECK(d.solutions == brute_Dmq(m, q));
        }
}

TEST_CASE("characteristic root: closed forms") {
    PerturbedKernel geo = load_kernel(model_path("geometric.json"));
    CHECK(solve_characteristic_root(geo, 0.1, 1) ==
          doctest::Approx(-std::log(0.9)).epsilon(1e-12));
    CHECK(solve_characteristic_root(geo, 0.0, 1) == 0.0);
    PerturbedKernel quasi = load_kernel(model_path("quasi.json"));
    CHECK(solve_characteristic_root(quasi, 0.0, 1) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(solve_characteristic_root(quasi, 0.1, 1) ==
          doctest::Approx(std::log(2.0) - std::log(0.9)).epsilon(1e-12));
}

TEST_CASE("characteristic root: residual and independence of the reference state") {
    for (const char* name : {"threestate.json", "quasi2.json"}) {
        PerturbedKernel k = load_kernel(model_path(name));
        for (double eps : {0.0, 0.05, 0.1}) {
            std::vector<double> roots;
            for (int i = 1; i <= k.num_states(); ++i) {
                double rho = solve_characteristic_root(k, eps, i);
                roots.push_back(rho);
                double phi = hitting_mgf(k, eps, rho, i)[static_cast<std::size_t>(i - 1)];
                CHECK(std::fabs(phi - 1.0) <= 1e-12);
            }
            for (double a : roots)
                for (double b : roots) CHECK(std::fabs(a - b) <= 1e-10);
            // every return-time mgf equals one at the shared root
            for (int j = 1; j <= k.num_states(); ++j) {
                double phi = hitting_mgf(k, eps, roots[0], j)[static_cast<std::size_t>(j - 1)];
                CHECK(std::fabs(phi - 1.0) <= 1e-10);
            }
        }
    }
}

TEST_CASE("transition moment series: read off the polynomial directly") {
    PerturbedKernel geo = load_kernel(model_path("geometric.json"));
    MatrixSeries<double> s0 = transition_moment_series(geo, 0.0, 0, 3);
    CHECK(s0.coeffs[0](0, 1) == 1.0);
    CHECK(s0.coeffs[1](0, 1) == -1.0);
    CHECK(s0.coeffs[2](0, 1) == 0.0);
    CHECK(s0.coeffs[0](0, 0) == 0.0);
    CHECK(s0.coeffs[1](0, 0) == 1.0);
    MatrixSeries<double> s2 = transition_moment_series(geo, 0.0, 2, 2);
    CHECK(s2.coeffs[0](0, 1) == 1.0);
    CHECK(s2.coeffs[1](0, 1) == -1.0);
    PerturbedKernel quasi = load_kernel(model_path("quasi.json"));
    MatrixSeries<double> q1 = transition_moment_series(quasi, std::log(2.0), 1, 2);
    CHECK(q1.coeffs[0](0, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q1.coeffs[1](0, 1) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("hitting moment series: degenerate taboo system copies the kernel row") {
    PerturbedKernel geo = load_kernel(model_path("geometric.json"));
    auto b = moment_coefficient_table<double>(geo, 1.0, 0.0, 1, 3);
    REQUIRE(b.size() == 4);
    CHECK(b[0] == std::vector<double>{1.0, -1.0, 0.0, 0.0});
    CHECK(b[1] == std::vector<double>{1.0, -1.0, 0.0});
    CHECK(b[2] == std::vector<double>{1.0, -1.0});
    CHECK(b[3] == std::vector<double>{1.0});
}

TEST_CASE("hitting moment series: constant terms equal the fixed-eps moments") {
    for (const char* name : {"threestate.json", "quasi2.json"}) {
        PerturbedKernel k = load_kernel(model_path(name));
        double rho0 = solve_characteristic_root(k, 0.0, 1);
        for (int j = 1; j <= k.num_states(); ++j) {
            auto series = hitting_moment_series(k, rho0, j, 3);
            auto direct = hitting_mgf_mixed(k, 0.0, rho0, j, 3);
            for (int r = 0; r <= 3; ++r)
                for (int i = 0; i < k.num_states(); ++i)
                    CHECK(series[static_cast<std::size_t>(r)].coeffs[0](
                              static_cast<std::size_t>(i), 0) ==
                          doctest::Approx(direct[static_cast<std::size_t>(r)]
                                                [static_cast<std::size_t>(i)])
                              .epsilon(1e-12));
        }
    }
}

TEST_CASE("hitting moment series: evaluation error has the truncation slope") {
    const int k_order = 3;
    for (const char* name : {"threestate.json", "quasi2.json"}) {
        PerturbedKernel k = load_kernel(model_path(name));
        double rho0 = solve_characteristic_root(k, 0.0, 1);
        auto series = hitting_moment_series(k, rho0, 1, k_order);
        std::vector<double> grid = {1e-1, 1e-2, 1e-3, 1e-4};
        for (int r = 0; r <= 2; ++r) {
            std::vector<double> errs;
            for (double eps : grid) {
                auto direct = hitting_mgf_mixed(k, eps, rho0, 1, r);
                Matrix<double> at = series[static_cast<std::size_t>(r)].eval(eps);
                double e = 0.0;
                for (int i = 0; i < k.num_states(); ++i)
                    e = std::max(e, std::fabs(at(static_cast<std::size_t>(i), 0) -
                                              direct[static_cast<std::size_t>(r)]
                                                    [static_cast<std::size_t>(i)]));
                errs.push_back(e);
            }
            CHECK(loglog_slope(grid, errs) >= k_order - r + 0.9);
        }
    }
}

TEST_CASE("root expansion: geometric model gives the log series") {
    PerturbedKernel geo = load_kernel(model_path("geometric.json"));
    auto b = moment_coefficient_table<double>(geo, 1.0, 0.0, 1, 5);
    std::vector<double> c = root_expansion<double>(b, 5);
    for (int n = 1; n <= 5; ++n)
        CHECK(c[static_cast<std::size_t>(n)] == doctest::Approx(1.0 / n).epsilon(1e-12));
    // exact backend: the same numbers as rationals
    auto br = moment_coefficient_table<Rational>(geo, Rational(1), 0.0, 1, 5);
    std::vector<Rational> cr = root_expansion<Rational>(br, 5);
    for (int n = 1; n <= 5; ++n) CHECK(cr[static_cast<std::size_t>(n)] == Rational(1, n));
}

TEST_CASE("root expansion: quasi model expands around log 2") {
    PerturbedKernel quasi = load_kernel(model_path("quasi.json"));
    RootExpansion rx = compute_expansion(quasi, 4);
    CHECK(rx.rho0 == doctest::Approx(std::log(2.0)).epsilon(1e-13));
    CHECK_FALSE(rx.pseudo_stationary);
    for (int n = 1; n <= 4; ++n)
        CHECK(rx.c[static_cast<std::size_t>(n)] == doctest::Approx(1.0 / n).epsilon(1e-10));
    CHECK(rx.pi_tilde(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
    // exact backend snaps e^{rho0} to 2 and verifies it
    RationalExpansion rex = compute_expansion_rational(quasi, 4);
    CHECK(rex.w == Rational(2));
    for (int n = 1; n <= 4; ++n) CHECK(rex.c[static_cast<std::size_t>(n)] == Rational(1, n));
}

TEST_CASE("root expansion: coefficients do not depend on the reference state") {
    for (const char* name : {"threestate.json", "quasi2.json"}) {
        PerturbedKernel k = load_kernel(model_path(name));
        ExpansionOptions o1, o2;
        o1.reference_state = 1;
        o2.reference_state = 2;
        RootExpansion r1 = compute_expansion(k, 4, o1);
        RootExpansion r2 = compute_expansion(k, 4, o2);
        for (int n = 1; n <= 4; ++n)
            CHECK(r1.c[static_cast<std::size_t>(n)] ==
                  doctest::Approx(r2.c[static_cast<std::size_t>(n)]).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("root expansion: partial sums track the solved root at the right order") {
    const int k_order = 3;
    for (const char* name : {"geometric.json", "threestate.json", "quasi2.json"}) {
        PerturbedKernel k = load_kernel(model_path(name));
        RootExpansion rx = compute_expansion(k, k_order);
        std::vector<double> grid = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
        std::vector<double> errs;
        for (double eps : grid) {
            if (eps > k.eps_max()) continue;
            double truth = solve_characteristic_root(k, eps, 1);
            double approx = rx.rho0;
            double ep = 1.0;
            for (int n = 1; n <= k_order; ++n) {
                ep *= eps;
                approx += rx.c[static_cast<std::size_t>(n)] * ep;
            }
            errs.push_back(std::fabs(truth - approx));
        }
        CHECK(loglog_slope(grid, errs) >= k_order + 0.9);
    }
}

TEST_CASE("occupation limits: single-state models") {
    PerturbedKernel geo = load_kernel(model_path("geometric.json"));
    CHECK(quasi_stationary_row(geo, 0.0, 1)[0] == doctest::Approx(1.0).epsilon(1e-12));
    PerturbedKernel quasi = load_kernel(model_path("quasi.json"));
    CHECK(quasi_stationary_row(quasi, std::log(2.0), 1)[0] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("occupation limits: pseudo-stationary rows coincide and sum to one") {
    PerturbedKernel k = load_kernel(model_path("threestate.json"));
    RootExpansion rx = compute_expansion(k, 2);
    CHECK(rx.pseudo_stationary);
    CHECK(rx.rho0 == 0.0);
    const int n = k.num_states();
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            sum += rx.pi_tilde(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            CHECK(std::fabs(rx.pi_tilde(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) -
                            rx.pi_tilde(0, static_cast<std::size_t>(j))) <= 1e-9);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("occupation limits: quasi-stationary dual routes stay consistent") {
    PerturbedKernel k = load_kernel(model_path("quasi2.json"));
    double rho0 = solve_characteristic_root(k, 0.0, 1);
    for (int i = 1; i <= 2; ++i) {
        std::vector<double> row = quasi_stationary_row(k, rho0, i); // throws on disagreement
        for (double v : row) CHECK(v > 0.0);
    }
}

TEST_CASE("asymptotic prediction: closed-form comparisons") {
    PerturbedKernel geo = load_kernel(model_path("geometric.json"));
    RootExpansion rx = compute_expansion(geo, 2);
    double pred = asymptotic_predict(rx, 1, 1, 0.01, 100.0, 1);
    CHECK(pred == doctest::Approx(std::exp(-1.0)).epsilon(1e-10));
    RenewalSolution sol = renewal_solve(geo, 0.01, 1, 128);
    double exact = sol.p[0][100];
    CHECK(exact == doctest::Approx(std::pow(0.99, 100)).epsilon(1e-12));
    CHECK(std::fabs(pred / exact - 1.0) < 0.01);
    // r = order: the full expansion sits in the exponent
    double pred2 = asymptotic_predict(rx, 1, 1, 0.01, 100.0, 2);
    double full = std::exp(-(rx.c[1] * 0.01 + rx.c[2] * 0.0001) * 100.0);
    CHECK(pred2 == doctest::Approx(full).epsilon(1e-12));
    CHECK_THROWS(asymptotic_predict(rx, 1, 1, 0.01, 100.0, 3));
    PerturbedKernel quasi = load_kernel(model_path("quasi.json"));
    RootExpansion rq = compute_expansion(quasi, 2);
    RenewalSolution sq = renewal_solve(quasi, 0.0, 1, 64);
    for (int n : {1, 5, 20})
        CHECK(asymptotic_predict(rq, 1, 1, 0.0, n, 1) ==
              doctest::Approx(sq.p[0][static_cast<std::size_t>(n)]).epsilon(1e-12));
}

TEST_CASE("long-time ratio drifts toward the predicted limit as eps shrinks") {
    PerturbedKernel k = load_kernel(model_path("threestate.json"));
    RootExpansion rx = compute_expansion(k, 2);
    double prev = 1e9;
    for (double eps : {0.04, 0.02, 0.01}) {
        long long n = static_cast<long long>(std::floor(1.0 / eps));
        RenewalSolution sol = renewal_solve(k, eps, 1, static_cast<int>(n) + 4);
        double worst = 0.0;
        for (int j = 1; j <= k.num_states(); ++j) {
            double oracle = sol.p[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(n)];
            double limit = rx.pi_tilde(0, static_cast<std::size_t>(j - 1)) *
                           std::exp(-1.0 * rx.c[1]); // lambda_1 = eps * n = 1
            double denom = std::exp(-rx.rho0 * static_cast<double>(n));
            worst = std::max(worst, std::fabs(oracle / denom / limit - 1.0));
        }
        CHECK(worst < prev);
        prev = worst;
    }
    CHECK(prev < 0.05);
}

TEST_CASE("random kernels: full expansions stay internally consistent") {
    for (const PerturbedKernel& k : semimarkov::testing::random_corpus(6, 7151ULL)) {
        RootExpansion rx = compute_expansion(k, 3);
        CHECK(rx.root_residual <= 1e-12);
        CHECK(rx.root_spread <= 1e-10);
        const int n = k.num_states();
        if (rx.pseudo_stationary) {
            for (int i = 0; i < n; ++i) {
                double sum = 0.0;
                for (int j = 0; j < n; ++j) {
                    sum += rx.pi_tilde(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
                    CHECK(std::fabs(rx.pi_tilde(static_cast<std::size_t>(i),
                                                static_cast<std::size_t>(j)) -
                                    rx.pi_tilde(0, static_cast<std::size_t>(j))) <= 1e-9);
                }
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
        // the order-3 partial sum must beat the order-1 partial sum well
        // inside the validity interval
        double eps = 0.05;
        double truth = solve_characteristic_root(k, eps, 1);
        double p1 = rx.rho0 + rx.c[1] * eps;
        double p3 = p1 + rx.c[2] * eps * eps + rx.c[3] * eps * eps * eps;
        CHECK(std::fabs(truth - p3) < std::fabs(truth - p1));
    }
}

TEST_CASE("four-state kernel at order five: both backends, slopes, structure") {
    std::vector<KernelEntry> entries;
    auto row = [&](int i, std::initializer_list<std::tuple<int, int, double>> cells) {
        for (auto [to, t, w] : cells) entries.push_back({i, to, t, {{w, -w}}});
        entries.push_back({i, 0, 1, {{0.0, 1.0}}});
    };
    row(1, {{2, 1, 0.5}, {1, 1, 0.25}, {3, 2, 0.25}});
    row(2, {{3, 1, 0.5}, {1, 2, 0.5}});
    row(3, {{4, 1, 0.5}, {1, 1, 0.5}});
    row(4, {{1, 3, 0.75}, {2, 1, 0.25}});
    PerturbedKernel k(4, 0.2, entries);
    REQUIRE(validate_model(k).all_pass());
    RootExpansion rx = compute_expansion(k, 5);
    CHECK(rx.pseudo_stationary);
    CHECK(rx.root_residual <= 1e-12);
    CHECK(rx.root_spread <= 1e-10);
    RationalExpansion rr = compute_expansion_rational(k, 5);
    for (int n = 1; n <= 5; ++n)
        CHECK(rx.c[static_cast<std::size_t>(n)] ==
              doctest::Approx(rr.c[static_cast<std::size_t>(n)].to_double()).epsilon(1e-11));
    for (int i = 0; i < 4; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 4; ++j) {
            sum += rx.pi_tilde(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            CHECK(std::fabs(rx.pi_tilde(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) -
                            rx.pi_tilde(0, static_cast<std::size_t>(j))) <= 1e-9);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    std::vector<double> grid = {1e-1, 3e-2, 1e-2, 3e-3};
    std::vector<double> errs;
    for (double eps : grid) {
        double truth = solve_characteristic_root(k, eps, 1);
        double approx = rx.rho0, ep = 1.0;
        for (int n = 1; n <= 5; ++n) {
            ep *= eps;
            approx += rx.c[static_cast<std::size_t>(n)] * ep;
        }
        errs.push_back(std::fabs(truth - approx));
    }
    CHECK(loglog_slope(grid, errs) >= 5.9);
}

TEST_CASE("rational and float backends agree on a multi-state kernel") {
    PerturbedKernel k = load_kernel(model_path("threestate.json"));
    RootExpansion rf = compute_expansion(k, 4);
    RationalExpansion rr = compute_expansion_rational(k, 4);
    CHECK(rr.w == Rational(1));
    for (int n = 1; n <= 4; ++n)
        CHECK(rf.c[static_cast<std::size_t>(n)] ==
              doctest::Approx(rr.c[static_cast<std::size_t>(n)].to_double()).epsilon(1e-12));
    // the leading coefficient has a short closed form for this kernel
    CHECK(rr.c[1] == Rational(22, 35));
}

TEST_CASE("rational expansion refuses roots whose exponential is not exactly rational") {
    // e^{rho0} solves x + x^2 = 4 here, an irrational number; whatever the
    // snap proposes must fail the exact characteristic check
    std::vector<KernelEntry> entries = {{1, 1, 1, {{0.25, -0.25}}},
                                        {1, 1, 2, {{0.25, -0.25}}},
                                        {1, 0, 1, {{0.5, 0.5}}}};
    PerturbedKernel k(1, 0.5, entries);
    CHECK_THROWS_AS(compute_expansion_rational(k, 3), ConvergenceError);
}
