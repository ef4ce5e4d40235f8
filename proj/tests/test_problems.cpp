#include "eqstop/problems.hpp"
#include "eqstop/equilibrium.hpp"
#include "eqstop/errors.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace eqstop;
using namespace eqstop::testing;

TEST_CASE("the skip-free builder produces symmetric walks with absorbing ends") {
    std::vector<double> values(18, 0.0);
    for (int i = 1; i < 18; ++i) values[static_cast<size_t>(i)] = values[static_cast<size_t>(i - 1)] + i / 10.0;
    MarkovModel m = skipfree_model(values);
    CHECK(m.size() == 18);
    CHECK(validate(m).ok());
    CHECK(m.is_absorbing(0));
    CHECK(m.is_absorbing(17));
    CHECK(m.prob(5, 4) == 0.5);
    CHECK(m.prob(5, 6) == 0.5);
    CHECK(m.state(2).value == doctest::Approx(0.3).epsilon(1e-15));

    CHECK(skipfree_model({0.0, 1.0, 2.0}).size() == 3);
    CHECK_THROWS_AS(skipfree_model({0.0, 1.0}), ParameterError);
    CHECK_THROWS_AS(skipfree_model({0.1, 1.0, 2.0}), ParameterError);
    CHECK_THROWS_AS(skipfree_model({0.0, 2.0, 1.0}), ParameterError);
}

TEST_CASE("threshold strategies stop at and above the level") {
    Strategy s = threshold_strategy(6, 3);
    CHECK(s.p == std::vector<double>{1, 0, 1, 1, 1, 1});
    CHECK_THROWS_AS(threshold_strategy(6, 1), ParameterError);
    CHECK_THROWS_AS(threshold_strategy(6, 6), ParameterError);
}

TEST_CASE("the 18-state instance accepts exactly the documented threshold pattern") {
    std::vector<double> values(18, 0.0);
    for (int i = 1; i < 18; ++i) values[static_cast<size_t>(i)] = values[static_cast<size_t>(i - 1)] + i / 10.0;

    ThresholdReport r = threshold_H(values, 0.07, 16);
    CHECK(r.feasible);
    for (int i = 2; i <= 15; ++i) CHECK(r.H[static_cast<size_t>(i - 2)] >= 0.0);
    for (int i = 16; i <= 17; ++i) CHECK(r.H[static_cast<size_t>(i - 2)] <= 0.0);
    CHECK(r.max_route_diff <= 1e-10);

    // An infeasible threshold for contrast.
    ThresholdReport r5 = threshold_H(values, 0.07, 5);
    CHECK_FALSE(r5.feasible);

    CHECK_THROWS_AS(threshold_H(values, -0.1, 16), ParameterError);
    CHECK_THROWS_AS(threshold_H(values, 0.07, 1), ParameterError);
    CHECK_THROWS_AS(threshold_H(values, 0.07, 18), ParameterError);
}

TEST_CASE("equally spaced walks make H vanish above the threshold as gamma -> 0") {
    std::vector<double> values = {0, 1, 2, 3, 4, 5, 6, 7};
    ThresholdReport r = threshold_H(values, 1e-12, 4);
    for (int i = 5; i <= 6; ++i)
        CHECK(std::abs(r.H[static_cast<size_t>(i - 2)]) <= 1e-11); // exactly -gamma here
}

TEST_CASE("closed-form H agrees with the evaluation route on random instances") {
    std::mt19937_64 rng(51);
    for (int trial = 0; trial < 25; ++trial) {
        int n = 5 + static_cast<int>(rng() % 8);
        std::vector<double> values(static_cast<size_t>(n), 0.0);
        for (int i = 1; i < n; ++i)
            values[static_cast<size_t>(i)] = values[static_cast<size_t>(i - 1)] + uniform(rng, 0.05, 1.0);
        double gamma = uniform(rng, 0.01, 2.0);
        for (int b = 2; b <= n - 1; ++b) {
            ThresholdReport r = threshold_H(values, gamma, b);
            CHECK(r.max_route_diff <= 1e-10);
        }
    }
}

TEST_CASE("the scan lists b = 16 and its strategy verifies as an equilibrium") {
    std::vector<double> values(18, 0.0);
    for (int i = 1; i < 18; ++i) values[static_cast<size_t>(i)] = values[static_cast<size_t>(i - 1)] + i / 10.0;
    std::vector<ThresholdReport> feasible = threshold_scan(values, 0.07);
    bool has16 = false;
    MarkovModel m = skipfree_model(values);
    PayoffSpec payoff = make_mean_variance(m, 0.07);
    for (const ThresholdReport& r : feasible) {
        has16 = has16 || r.b == 16;
        EquilibriumReport check = check_equilibrium(m, payoff, threshold_strategy(18, r.b));
        CHECK(check.is_equilibrium);
        for (int i = 0; i < 18; ++i)
            CHECK(std::abs(r.J[static_cast<size_t>(i)] - check.eval.J[static_cast<size_t>(i)]) <= 1e-10);
    }
    CHECK(has16);
}

TEST_CASE("variance walk closed forms verify for the documented sizes") {
    for (int M : {1, 2, 3, 10, 100}) {
        VarianceWalkSolution sol = variance_walk(M);
        CHECK(sol.strategy.p[static_cast<size_t>(M)] == doctest::Approx(1.0 / (M + 1)).epsilon(1e-15));
        CHECK(sol.phi[0] == 0.0);
        CHECK(sol.psi[0] == 0.0);
        CHECK(sol.J[0] == 0.0);

        Evaluation e = evaluate(sol.model, sol.payoff, sol.strategy);
        for (int i = 0; i <= M; ++i) {
            size_t k = static_cast<size_t>(i);
            CHECK(std::abs(e.J[k] - (0.5 * i * M - 0.25 * i * i)) <= 1e-10);
            CHECK(std::abs(e.phi_next[k] - sol.phi_next[k]) <= 1e-10);
            CHECK(std::abs(e.psi_next[k] - sol.psi_next[k]) <= 1e-10);
        }

        EquilibriumReport r = check_equilibrium(sol.model, sol.payoff, sol.strategy);
        REQUIRE(r.is_equilibrium);
        for (int i = 0; i <= M; ++i) {
            const StateCheck& c = r.states[static_cast<size_t>(i)];
            CHECK(c.slack_I >= -1e-10); // the variance is never negative
            if (i != M) CHECK(std::abs(c.slack_II) <= 1e-10);
        }
        CHECK(std::abs(*r.states[static_cast<size_t>(M)].condition_III) <= 1e-10);

        CharacterizingResult ch = check_characterizing(sol.model, sol.payoff, sol.phi, sol.psi);
        CHECK(ch.holds);
    }
    CHECK_THROWS_AS(variance_walk(0), ParameterError);
}

TEST_CASE("the variance walk for M = 100 prices J(x_50) at 1875") {
    VarianceWalkSolution sol = variance_walk(100);
    CHECK(sol.J[50] == 1875.0);
}

TEST_CASE("all canned examples load and verify their recorded claims") {
    for (const char* name :
         {"ex5_1", "ex_two_equilibria(3)", "ex_no_equilibrium", "ex_global_stable", "variance_walk(3)"}) {
        WorkedExample ex = worked_example(name);
        CHECK(!ex.annotations.empty());
        for (const Annotation& a : ex.annotations) {
            std::string detail;
            bool ok = a.verify(detail);
            INFO(ex.name, ": ", a.claim, " -- ", detail);
            CHECK(ok);
        }
    }
}

TEST_CASE("the heavyweight mean-variance example verifies too") {
    WorkedExample ex = worked_example("meanvar18");
    for (const Annotation& a : ex.annotations) {
        std::string detail;
        bool ok = a.verify(detail);
        INFO(ex.name, ": ", a.claim, " -- ", detail);
        CHECK(ok);
    }
}

TEST_CASE("unknown example names are rejected with the catalogue") {
    CHECK_THROWS_WITH_AS(worked_example("nope"), doctest::Contains("known:"), ParameterError);
    CHECK_THROWS_AS(worked_example("ex_two_equilibria(1.5)"), ParameterError); // needs gamma > 2
}

TEST_CASE("figure exports carry the expected columns and values") {
    std::string fig = variance_figure_csv(100);
    CHECK(fig.rfind("i,J\n", 0) == 0);
    CHECK(fig.find("\n50,1875\n") != std::string::npos);

    std::vector<double> values(18, 0.0);
    for (int i = 1; i < 18; ++i) values[static_cast<size_t>(i)] = values[static_cast<size_t>(i - 1)] + i / 10.0;
    std::string th = threshold_figure_csv(values, 0.07, 16);
    std::istringstream lines(th);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "i,x_i,H,J");
    int rows = 0;
    for (std::string line; std::getline(lines, line);) ++rows;
    CHECK(rows == 18);
}
