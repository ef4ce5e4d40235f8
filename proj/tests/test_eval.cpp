#include "eqstop/eval.hpp"
#include "eqstop/errors.hpp"
#include "eqstop/problems.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace eqstop;
using namespace eqstop::testing;

namespace {

PayoffSpec ex5_payoff(const MarkovModel& m) {
    return make_payoff(m, {0, 0, 0, 0}, {0, 0, 1, 2}, g_shifted_positive_part(1.0));
}

} // namespace

TEST_CASE("the mixed strategy on the 4-state walk reproduces psi = (0, 2/7, 8/7, 2)") {
    MarkovModel m = walk_chain({1, 2, 3, 4});
    PayoffSpec payoff = ex5_payoff(m);
    Evaluation e = evaluate(m, payoff, strat({1, 0.5, 0, 1}));

    CHECK(std::abs(e.psi[0] - 0.0) <= 1e-12);
    CHECK(std::abs(e.psi[1] - 2.0 / 7.0) <= 1e-12);
    CHECK(std::abs(e.psi[2] - 8.0 / 7.0) <= 1e-12);
    CHECK(std::abs(e.psi[3] - 2.0) <= 1e-12);
    for (double v : e.phi) CHECK(v == 0.0);
    CHECK(std::abs(e.J[2] - 1.0 / 7.0) <= 1e-12);
    CHECK(std::abs(e.psi_next[1] - 4.0 / 7.0) <= 1e-12);
    CHECK(std::abs(e.psi_next[2] - 8.0 / 7.0) <= 1e-12);
}

TEST_CASE("stopping everywhere returns the immediate rewards") {
    std::mt19937_64 rng(11);
    MarkovModel m = random_absorbing_chain(rng);
    PayoffSpec payoff = make_payoff(m, random_vector(rng, m.size()), random_vector(rng, m.size()), g_zero());
    Strategy ones;
    ones.p.assign(static_cast<size_t>(m.size()), 1.0);
    Evaluation e = evaluate(m, payoff, ones);
    for (int i = 0; i < m.size(); ++i) {
        CHECK(e.phi[static_cast<size_t>(i)] == payoff.f[static_cast<size_t>(i)]);
        CHECK(e.psi[static_cast<size_t>(i)] == payoff.h[static_cast<size_t>(i)]);
    }
}

TEST_CASE("the variance walk evaluates to phi = iM/2 and psi = i/2") {
    for (int M : {5, 100}) {
        VarianceWalkSolution sol = variance_walk(M);
        Evaluation e = evaluate(sol.model, sol.payoff, sol.strategy);
        for (int i = 0; i <= M; ++i) {
            CHECK(std::abs(e.phi[static_cast<size_t>(i)] - 0.5 * i * M) <= 1e-10);
            CHECK(std::abs(e.psi[static_cast<size_t>(i)] - 0.5 * i) <= 1e-10);
        }
    }
}

TEST_CASE("the one-step recursion holds at every state") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 40; ++trial) {
        MarkovModel m = random_absorbing_chain(rng);
        PayoffSpec payoff =
            make_payoff(m, random_vector(rng, m.size()), random_vector(rng, m.size()), g_mean_variance(0.4));
        Strategy s = random_strategy(rng, m.size());
        Evaluation e = evaluate(m, payoff, s);
        for (int i = 0; i < m.size(); ++i) {
            size_t k = static_cast<size_t>(i);
            double lhs = e.phi[k];
            double rhs = s.p[k] * payoff.f[k] + (1.0 - s.p[k]) * e.phi_next[k];
            CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
        }
    }
}

TEST_CASE("values ignore the stopping probability at absorbing states") {
    std::mt19937_64 rng(13);
    MarkovModel m = random_absorbing_chain(rng, 3, 8);
    PayoffSpec payoff = make_payoff(m, random_vector(rng, m.size()), random_vector(rng, m.size()), g_zero());
    Strategy a = random_strategy(rng, m.size());
    Strategy b = a;
    for (int i : m.absorbing()) b.p[static_cast<size_t>(i)] = uniform(rng);
    Evaluation ea = evaluate(m, payoff, a);
    Evaluation eb = evaluate(m, payoff, b);
    CHECK(ea.phi == eb.phi);
    CHECK(ea.psi == eb.psi);
}

TEST_CASE("K at the strategy's own entry returns J") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        MarkovModel m = random_absorbing_chain(rng);
        PayoffSpec payoff =
            make_payoff(m, random_vector(rng, m.size()), random_vector(rng, m.size()), g_mean_variance(1.1));
        Strategy s = random_strategy(rng, m.size());
        Evaluation e = evaluate(m, payoff, s);
        for (int x = 0; x < m.size(); ++x) {
            size_t k = static_cast<size_t>(x);
            CHECK(std::abs(k_value(payoff, e, x, s.p[k]) - e.J[k]) <= 1e-12 * std::max(1.0, std::abs(e.J[k])));
        }
    }
}

TEST_CASE("K on the 4-state walk matches the closed forms") {
    MarkovModel m = walk_chain({1, 2, 3, 4});
    PayoffSpec payoff = ex5_payoff(m);
    Strategy mixed = strat({1, 0.5, 0, 1});
    CHECK(std::abs(k_value(m, payoff, mixed, 2, 0.0) - 1.0 / 7.0) <= 1e-12);
    CHECK(k_value(m, payoff, mixed, 2, 1.0) == 0.0);
    for (double q : {0.0, 0.3, 0.77, 1.0})
        CHECK(k_value(m, payoff, mixed, 1, q) == 0.0); // constant in q at state 2
    CHECK_THROWS_AS(k_value(m, payoff, mixed, 2, 1.5), ParameterError);
}

TEST_CASE("K is affine in q when g vanishes") {
    std::mt19937_64 rng(15);
    MarkovModel m = random_absorbing_chain(rng);
    PayoffSpec payoff = make_payoff(m, random_vector(rng, m.size()), random_vector(rng, m.size()), g_zero());
    Strategy s = random_strategy(rng, m.size());
    Evaluation e = evaluate(m, payoff, s);
    for (int x = 0; x < m.size(); ++x) {
        size_t k = static_cast<size_t>(x);
        double slope = k_value(payoff, e, x, 1.0) - k_value(payoff, e, x, 0.0);
        CHECK(std::abs(slope - (payoff.f[k] - e.phi_next[k])) <= 1e-12);
        double mid = k_value(payoff, e, x, 0.5);
        CHECK(std::abs(mid - 0.5 * (k_value(payoff, e, x, 0.0) + k_value(payoff, e, x, 1.0))) <= 1e-12);
    }
}

TEST_CASE("the truncated series closes in on the exact solve") {
    MarkovModel m = walk_chain({1, 2, 3, 4});
    PayoffSpec payoff = ex5_payoff(m);
    Strategy mixed = strat({1, 0.5, 0, 1});

    Evaluation series200 = evaluate_series(m, payoff, mixed, 200);
    CHECK(std::abs(series200.psi[1] - 2.0 / 7.0) <= 1e-8);

    Evaluation exact = evaluate(m, payoff, mixed);
    Evaluation series5 = evaluate_series(m, payoff, mixed, 5);
    Evaluation series60 = evaluate_series(m, payoff, mixed, 60);
    double err5 = 0.0, err60 = 0.0;
    for (size_t i = 0; i < exact.psi.size(); ++i) {
        err5 = std::max(err5, std::abs(series5.psi[i] - exact.psi[i]));
        err60 = std::max(err60, std::abs(series60.psi[i] - exact.psi[i]));
    }
    CHECK(err60 < err5);
    CHECK(err60 <= 1e-8);

    CHECK_THROWS_AS(evaluate_series(m, payoff, mixed, 0), ParameterError);
}

TEST_CASE("a single series step is exact when stopping is immediate") {
    std::mt19937_64 rng(16);
    MarkovModel m = random_absorbing_chain(rng);
    PayoffSpec payoff = make_payoff(m, random_vector(rng, m.size()), random_vector(rng, m.size()), g_zero());
    Strategy ones;
    ones.p.assign(static_cast<size_t>(m.size()), 1.0);
    Evaluation series = evaluate_series(m, payoff, ones, 1);
    Evaluation exact = evaluate(m, payoff, ones);
    for (size_t i = 0; i < exact.phi.size(); ++i) {
        CHECK(series.phi[i] == exact.phi[i]);
        CHECK(series.psi[i] == exact.psi[i]);
    }
}

TEST_CASE("simulation under stop-everywhere is exact with zero spread") {
    MarkovModel m = walk_chain({1, 2, 3, 4});
    PayoffSpec payoff = make_mean_variance(m, 0.5);
    Strategy ones = strat({1, 1, 1, 1});
    SimulationResult r = simulate(m, payoff, ones, 2, 500, 99);
    CHECK(r.phi_hat == payoff.f[2]);
    CHECK(r.psi_hat == payoff.h[2]);
    CHECK(r.phi_se == 0.0);
    CHECK(r.psi_se == 0.0);
}

TEST_CASE("simulation is deterministic in the seed") {
    VarianceWalkSolution sol = variance_walk(5);
    SimulationResult a = simulate(sol.model, sol.payoff, sol.strategy, 3, 20000, 1234);
    SimulationResult b = simulate(sol.model, sol.payoff, sol.strategy, 3, 20000, 1234);
    CHECK(a.phi_hat == b.phi_hat);
    CHECK(a.psi_hat == b.psi_hat);
    CHECK(a.phi_se == b.phi_se);
    SimulationResult c = simulate(sol.model, sol.payoff, sol.strategy, 3, 20000, 4321);
    CHECK(a.phi_hat != c.phi_hat);
}

TEST_CASE("the long variance walk simulates within four standard errors") {
    VarianceWalkSolution sol = variance_walk(100);
    SimulationResult r = simulate(sol.model, sol.payoff, sol.strategy, 50, 100000, 7);
    CHECK(std::abs(r.phi_hat - 2500.0) <= 4.0 * r.phi_se);
    CHECK(std::abs(r.psi_hat - 25.0) <= 4.0 * r.psi_se);
}

TEST_CASE("the three evaluation routes agree on a hundred random instances") {
    std::mt19937_64 rng(18);
    for (int trial = 0; trial < 100; ++trial) {
        MarkovModel m = random_absorbing_chain(rng, 2, 8);
        PayoffSpec payoff =
            make_payoff(m, random_vector(rng, m.size()), random_vector(rng, m.size()), g_zero());
        Strategy s = random_strategy(rng, m.size());
        Evaluation exact = evaluate(m, payoff, s);
        Evaluation series = evaluate_series(m, payoff, s, 4000);
        for (size_t i = 0; i < exact.phi.size(); ++i) {
            CHECK(std::abs(series.phi[i] - exact.phi[i]) <= 1e-8);
            CHECK(std::abs(series.psi[i] - exact.psi[i]) <= 1e-8);
        }
        int start = static_cast<int>(rng() % static_cast<std::uint64_t>(m.size()));
        SimulationResult sim = simulate(m, payoff, s, start, 20000, 18u + static_cast<unsigned>(trial));
        size_t k = static_cast<size_t>(start);
        CHECK(std::abs(sim.phi_hat - exact.phi[k]) <= 4.0 * sim.phi_se + 1e-12);
        CHECK(std::abs(sim.psi_hat - exact.psi[k]) <= 4.0 * sim.psi_se + 1e-12);
    }
}

TEST_CASE("simulation validates its arguments") {
    VarianceWalkSolution sol = variance_walk(3);
    CHECK_THROWS_AS(simulate(sol.model, sol.payoff, sol.strategy, -1, 10, 1), ParameterError);
    CHECK_THROWS_AS(simulate(sol.model, sol.payoff, sol.strategy, 0, 0, 1), ParameterError);
}

TEST_CASE("evaluations respond continuously to strategy perturbations") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        MarkovModel m = random_absorbing_chain(rng, 3, 8);
        PayoffSpec payoff =
            make_payoff(m, random_vector(rng, m.size()), random_vector(rng, m.size()), g_zero());
        Strategy s = random_strategy(rng, m.size());
        Evaluation base = evaluate(m, payoff, s);

        // Instance-derived Lipschitz bound from a coarse finite difference,
        // with generous headroom.
        const double coarse = 1e-3;
        double lipschitz = 1.0;
        for (int probe = 0; probe < 4; ++probe) {
            Strategy t = s;
            for (size_t i = 0; i < t.p.size(); ++i)
                t.p[i] = std::clamp(t.p[i] + coarse * (uniform(rng) > 0.5 ? 1.0 : -1.0), 0.0, 1.0);
            Evaluation moved = evaluate(m, payoff, t);
            for (size_t i = 0; i < moved.phi.size(); ++i)
                lipschitz = std::max(lipschitz, std::abs(moved.phi[i] - base.phi[i]) / coarse);
        }

        const double delta = 1e-6;
        Strategy t = s;
        for (size_t i = 0; i < t.p.size(); ++i)
            t.p[i] = std::clamp(t.p[i] + delta * (uniform(rng) > 0.5 ? 1.0 : -1.0), 0.0, 1.0);
        Evaluation moved = evaluate(m, payoff, t);
        for (size_t i = 0; i < moved.phi.size(); ++i)
            CHECK(std::abs(moved.phi[i] - base.phi[i]) <= 10.0 * lipschitz * delta + 1e-12);
    }
}
