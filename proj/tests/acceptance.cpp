// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Tolerances are pinned in the checks themselves.

#include "eqstop/chain.hpp"
#include "eqstop/dynamics.hpp"
#include "eqstop/equilibrium.hpp"
#include "eqstop/errors.hpp"
#include "eqstop/eval.hpp"
#include "eqstop/payoff.hpp"
#include "eqstop/problems.hpp"

#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace eqstop;
using namespace eqstop::testing;

namespace {

struct Tracked {
    MarkovModel model;
    PayoffSpec payoff;
    Strategy strategy;
    Evaluation eval;
};

std::vector<Tracked> g_evaluations; // replayed by criterion 9

Evaluation tracked_evaluate(const MarkovModel& m, const PayoffSpec& p, const Strategy& s) {
    Evaluation e = evaluate(m, p, s);
    g_evaluations.push_back({m, p, s, e});
    return e;
}

struct Criterion {
    std::string name;
    std::function<bool(std::string&)> check;
};

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::vector<double> meanvar18_values() {
    std::vector<double> x(18, 0.0);
    for (int i = 1; i < 18; ++i) x[static_cast<size_t>(i)] = x[static_cast<size_t>(i - 1)] + i / 10.0;
    return x;
}

MarkovModel two_state_halfloop() {
    return MarkovModel({{"1", 1.0}, {"2", 2.0}}, {0.5, 0.5, 0.0, 1.0});
}

bool criterion1(std::string& why) {
    MarkovModel m = walk_chain({1, 2, 3, 4});
    PayoffSpec payoff = make_payoff(m, {0, 0, 0, 0}, {0, 0, 1, 2}, g_shifted_positive_part(1.0));
    Strategy mixed = strat({1, 0.5, 0, 1});

    Evaluation e = tracked_evaluate(m, payoff, mixed);
    const double expected_psi[] = {0.0, 2.0 / 7.0, 8.0 / 7.0, 2.0};
    for (int i = 0; i < 4; ++i)
        if (!close(e.psi[static_cast<size_t>(i)], expected_psi[i], 1e-12)) {
            why = "psi mismatch at state " + std::to_string(i + 1);
            return false;
        }
    if (!check_equilibrium(m, payoff, mixed).is_equilibrium) {
        why = "(1,1/2,0,1) not verified as an equilibrium";
        return false;
    }

    const double mixed_J3 = e.J[2];
    struct Candidate { Strategy s; double psi3; };
    const std::vector<Candidate> candidates = {{strat({1, 0, 0, 1}), 4.0 / 3.0},
                                               {strat({1, 0, 1, 1}), 1.0},
                                               {strat({1, 1, 0, 1}), 1.0},
                                               {strat({1, 1, 1, 1}), 1.0}};
    for (const Candidate& c : candidates) {
        Evaluation ce = tracked_evaluate(m, payoff, c.s);
        if (!close(ce.psi[2], c.psi3, 1e-12)) {
            why = "pure candidate psi(3) mismatch";
            return false;
        }
        if (close(ce.J[2], mixed_J3, 1e-9)) {
            why = "a pure candidate is value-equivalent to the mixed equilibrium";
            return false;
        }
    }

    try {
        purify(m, payoff, mixed);
        why = "purify accepted a convex-but-not-strictly-convex g";
        return false;
    } catch (const CapabilityError&) {
    }
    return true;
}

bool criterion2(std::string& why) {
    const std::vector<double> values = meanvar18_values();
    MarkovModel m = skipfree_model(values);
    PayoffSpec payoff = make_mean_variance(m, 0.07);

    bool has16 = false;
    for (const ThresholdReport& r : threshold_scan(values, 0.07)) has16 = has16 || r.b == 16;
    if (!has16) {
        why = "threshold scan does not report b = 16";
        return false;
    }

    ThresholdReport r16 = threshold_H(values, 0.07, 16);
    for (int i = 2; i <= 17; ++i) {
        double H = r16.H[static_cast<size_t>(i - 2)];
        if ((i <= 15 && H < 0.0) || (i >= 16 && H > 0.0)) {
            why = "H sign pattern broken at i = " + std::to_string(i);
            return false;
        }
    }

    Strategy threshold = threshold_strategy(18, 16);
    tracked_evaluate(m, payoff, threshold);
    if (!check_equilibrium(m, payoff, threshold).is_equilibrium) {
        why = "threshold strategy b = 16 fails the equilibrium check";
        return false;
    }

    for (int b = 2; b <= 17; ++b) {
        ThresholdReport r = threshold_H(values, 0.07, b);
        if (r.max_route_diff > 1e-10) {
            why = "closed-form and generic H differ at b = " + std::to_string(b);
            return false;
        }
    }
    return true;
}

bool criterion3(std::string& why) {
    MarkovModel m = two_state_halfloop();
    PayoffSpec payoff = make_mean_variance(m, 3.0);

    Evaluation stop = tracked_evaluate(m, payoff, strat({1, 1}));
    Evaluation wait = tracked_evaluate(m, payoff, strat({0, 1}));
    if (!check_equilibrium(m, payoff, strat({1, 1})).is_equilibrium ||
        !check_equilibrium(m, payoff, strat({0, 1})).is_equilibrium) {
        why = "one of the two strategies fails the equilibrium check";
        return false;
    }
    if (!close(stop.J[0], 1.0, 1e-12) || !close(stop.J[1], 2.0, 1e-12) ||
        !close(wait.J[0], 2.0, 1e-12) || !close(wait.J[1], 2.0, 1e-12)) {
        why = "equilibrium values differ from (1,2) and (2,2)";
        return false;
    }
    if (equivalent(m, payoff, strat({1, 1}), strat({0, 1}))) {
        why = "the two equilibria were reported equivalent";
        return false;
    }
    PureEnumeration pe = enumerate_pure(m, payoff);
    if (pe.equilibria.size() != 2 || pe.equilibria[0].p != std::vector<double>{0, 1} ||
        pe.equilibria[1].p != std::vector<double>{1, 1}) {
        why = "pure enumeration does not return exactly these two";
        return false;
    }
    return true;
}

bool criterion4(std::string& why) {
    MarkovModel m = walk_chain({0.39, 0.52, 0.70, 0.97});
    PayoffSpec payoff = make_mean_variance(m, 1.0);

    if (!enumerate_pure(m, payoff).equilibria.empty()) {
        why = "pure enumeration found an equilibrium";
        return false;
    }

    const std::vector<std::vector<double>> cycle = {
        {1, 1, 1, 1}, {1, 0, 1, 1}, {1, 0, 0, 1}, {1, 1, 0, 1}};
    for (size_t start = 0; start < cycle.size(); ++start) {
        Strategy s;
        s.p = cycle[start];
        AdjustmentTrace t = myopic(m, payoff, s, 100);
        if (t.termination != AdjustmentTrace::Termination::cycle || t.cycle_length != 4) {
            why = "myopic did not report a 4-cycle from start " + std::to_string(start);
            return false;
        }
        for (size_t k = 0; k < t.iterates.size(); ++k)
            if (t.iterates[k].p != cycle[(start + k) % 4]) {
                why = "cycle order differs from (i)->(ii)->(iii)->(iv)";
                return false;
            }
    }

    struct Printed { Strategy s; int state; bool next; double a, b, c; };
    const std::vector<Printed> printed = {
        {strat({1, 1, 1, 1}), 1, true, -0.3211, 0.5450, 0.5210},
        {strat({1, 0, 1, 1}), 2, true, -0.6310, 0.7575, 0.7003},
        {strat({1, 0, 0, 1}), 1, false, -0.4150, 0.5833, 0.5086},
        {strat({1, 1, 0, 1}), 2, false, -0.6057, 0.7450, 0.6944}};
    for (const Printed& p : printed) {
        Evaluation e = tracked_evaluate(m, payoff, p.s);
        size_t k = static_cast<size_t>(p.state);
        double a = p.next ? e.phi_next[k] : e.phi[k];
        double b = p.next ? e.psi_next[k] : e.psi[k];
        double c = p.next ? a + g_eval(payoff.g, b) : e.J[k];
        if (!close(a, p.a, 1e-4) || !close(b, p.b, 1e-4) || !close(c, p.c, 1e-4)) {
            why = "printed intermediate values not reproduced to 1e-4";
            return false;
        }
    }
    return true;
}

bool criterion5(std::string& why) {
    for (int M : {1, 2, 3, 10, 100}) {
        VarianceWalkSolution sol = variance_walk(M);
        if (!check_equilibrium(sol.model, sol.payoff, sol.strategy).is_equilibrium) {
            why = "equilibrium check failed at M = " + std::to_string(M);
            return false;
        }
        if (!check_characterizing(sol.model, sol.payoff, sol.phi, sol.psi).holds) {
            why = "characterizing system failed at M = " + std::to_string(M);
            return false;
        }
        Evaluation e = tracked_evaluate(sol.model, sol.payoff, sol.strategy);
        for (int i = 0; i <= M; ++i)
            if (!close(e.J[static_cast<size_t>(i)], 0.5 * i * M - 0.25 * i * i, 1e-10)) {
                why = "J closed form missed at M = " + std::to_string(M);
                return false;
            }
        for (double eps : {1e-3, 1e-4}) {
            Strategy pert = sol.strategy;
            pert.p[static_cast<size_t>(M)] += eps;
            Strategy img = gamma_bar(sol.model, sol.payoff, pert);
            // The linear response law only reaches outside [0,1] when eps is
            // too large for the walk (M = 100 with eps = 1e-3); the response
            // then sits on the boundary.
            double expected = std::clamp(1.0 / (M + 1) - 0.5 * (M - 1) * eps, 0.0, 1.0);
            if (!close(img.p[static_cast<size_t>(M)], expected, 1e-10)) {
                why = "perturbation response missed at M = " + std::to_string(M);
                return false;
            }
        }
    }
    VarianceWalkSolution m3 = variance_walk(3);
    ProbeReport local = probe_local(m3.model, m3.payoff, m3.strategy, 1e-3, 20, 200, 20240);
    if (local.passed) {
        why = "the M = 3 equilibrium was not reported unstable";
        return false;
    }
    return true;
}

bool criterion6(std::string& why) {
    MarkovModel m({{"0", 0.0}, {"1", 1.0}}, {1.0, 0.0, 0.5, 0.5});
    PayoffSpec payoff = make_variance(m);

    std::mt19937_64 rng(606);
    for (int i = 0; i < 100; ++i) {
        double p1 = uniform(rng), p2 = uniform(rng);
        Strategy img = gamma_bar(m, payoff, strat({p1, p2}));
        if (img.p[0] != 1.0 || !close(img.p[1], 0.5 * (1.0 - p2), 1e-12)) {
            why = "response map differs from (1,(1-p2)/2)";
            return false;
        }
    }

    ProbeReport global = probe_global(m, payoff, strat({1, 1.0 / 3.0}), 100, 20240, 500);
    if (!global.passed || global.samples != 104) {
        why = "global-stability probe failed (" + std::to_string(global.failures) + " failures)";
        return false;
    }
    return true;
}

bool criterion7(std::string& why) {
    std::mt19937_64 rng(707);
    for (int trial = 0; trial < 100; ++trial) {
        MarkovModel m = random_absorbing_chain(rng, 2, 8);
        std::vector<double> f = random_vector(rng, m.size());
        PayoffSpec payoff = make_payoff(m, f, std::vector<double>(f.size(), 0.0), g_zero());
        std::vector<double> v = optimal_stopping_value(m, f);

        PureEnumeration pe = enumerate_pure(m, payoff);
        for (size_t e = 0; e < pe.equilibria.size(); ++e)
            for (size_t i = 0; i < v.size(); ++i)
                if (!close(pe.evaluations[e].J[i], v[i], 1e-9)) {
                    why = "a pure equilibrium's value differs from the optimal stopping value";
                    return false;
                }

        Strategy rule = optimal_stopping_strategy(m, f);
        tracked_evaluate(m, payoff, rule);
        EquilibriumReport check = check_equilibrium(m, payoff, rule);
        if (!check.is_equilibrium) {
            why = "the value-iteration rule fails the equilibrium check";
            return false;
        }
        for (const StateCheck& c : check.states)
            if (std::min({std::abs(c.slack_I), std::abs(c.slack_II),
                          c.condition_III ? std::abs(*c.condition_III) : 1e9}) > 1e-9) {
                why = "no binding condition at some state of the optimal rule";
                return false;
            }
    }
    return true;
}

bool criterion8(std::string& why) {
    std::mt19937_64 rng(808);
    for (int trial = 0; trial < 25; ++trial) {
        MarkovModel m = random_absorbing_chain(rng, 2, 8);
        PayoffSpec payoff = make_payoff(m, random_vector(rng, m.size()), random_vector(rng, m.size()),
                                        g_mean_variance(uniform(rng, 0.2, 1.5)));
        Strategy s = random_strategy(rng, m.size());

        Evaluation exact = tracked_evaluate(m, payoff, s);
        Evaluation series = evaluate_series(m, payoff, s, 10000);
        for (size_t i = 0; i < exact.phi.size(); ++i)
            if (!close(series.phi[i], exact.phi[i], 1e-8) || !close(series.psi[i], exact.psi[i], 1e-8)) {
                why = "series oracle disagrees beyond 1e-8";
                return false;
            }

        int start = static_cast<int>(rng() % static_cast<std::uint64_t>(m.size()));
        SimulationResult sim = simulate(m, payoff, s, start, 100000, 808 + static_cast<unsigned>(trial));
        size_t k = static_cast<size_t>(start);
        if (std::abs(sim.phi_hat - exact.phi[k]) > 4.0 * sim.phi_se + 1e-12 ||
            std::abs(sim.psi_hat - exact.psi[k]) > 4.0 * sim.psi_se + 1e-12) {
            why = "simulation oracle outside four standard errors at trial " + std::to_string(trial);
            return false;
        }
    }
    return true;
}

bool criterion9(std::string& why) {
    // One-step recursion at every state of every evaluation the other
    // criteria produced.
    if (g_evaluations.size() < 100) {
        why = "expected the earlier criteria to produce at least 100 evaluations";
        return false;
    }
    for (const Tracked& t : g_evaluations) {
        try {
            assert_one_step_identity(t.model, t.payoff, t.strategy, t.eval, 1e-10);
        } catch (const NumericalError& e) {
            why = e.what();
            return false;
        }
    }

    // Convex g: best responses are endpoints or the whole interval.
    std::mt19937_64 rng(909);
    for (int trial = 0; trial < 100; ++trial) {
        MarkovModel m = random_absorbing_chain(rng, 2, 7);
        GDescriptor g = trial % 2 == 0 ? g_mean_variance(uniform(rng, 0.1, 2.0))
                                       : g_shifted_positive_part(uniform(rng, -1.0, 1.0));
        PayoffSpec payoff = make_payoff(m, random_vector(rng, m.size()), random_vector(rng, m.size()), g);
        BestResponseSet br = best_response(m, payoff, random_strategy(rng, m.size()));
        for (const StateBestResponse& r : br.states)
            for (const Interval& iv : r.intervals)
                if (!((iv.lo == 0.0 && iv.hi == 0.0) || (iv.lo == 1.0 && iv.hi == 1.0) ||
                      (iv.lo == 0.0 && iv.hi == 1.0))) {
                    why = "a convex-g best response is neither an endpoint nor [0,1]";
                    return false;
                }
    }

    // Differentiable-g equilibria bind one of the three conditions per state.
    struct Verified { MarkovModel m; PayoffSpec p; Strategy s; };
    std::vector<Verified> equilibria;
    {
        MarkovModel m = two_state_halfloop();
        PayoffSpec payoff = make_mean_variance(m, 3.0);
        equilibria.push_back({m, payoff, strat({1, 1})});
        equilibria.push_back({m, payoff, strat({0, 1})});
    }
    {
        MarkovModel m = skipfree_model(meanvar18_values());
        equilibria.push_back({m, make_mean_variance(m, 0.07), threshold_strategy(18, 16)});
    }
    for (int M : {1, 3, 10}) {
        VarianceWalkSolution sol = variance_walk(M);
        equilibria.push_back({sol.model, sol.payoff, sol.strategy});
    }
    for (const Verified& v : equilibria) {
        EquilibriumReport r = check_equilibrium(v.m, v.p, v.s);
        if (!r.is_equilibrium) {
            why = "a recorded equilibrium failed its check";
            return false;
        }
        for (const StateCheck& c : r.states) {
            double least = std::min({std::abs(c.slack_I), std::abs(c.slack_II),
                                     c.condition_III ? std::abs(*c.condition_III) : 1e9});
            if (least > 1e-9) {
                why = "no condition binds at some state of a verified equilibrium";
                return false;
            }
        }
    }
    return true;
}

bool criterion10(std::string& why) {
    {
        MarkovModel m = skipfree_model(meanvar18_values());
        PayoffSpec payoff = make_mean_variance(m, 0.07);
        ProbeReport r = probe_strong_local(m, payoff, threshold_strategy(18, 16), {}, 1e-4, 200, 1010);
        if (!r.passed) {
            why = "threshold equilibrium failed the one-step return probe (" +
                  std::to_string(r.failures) + " failures)";
            return false;
        }
    }
    MarkovModel m = two_state_halfloop();
    PayoffSpec payoff = make_mean_variance(m, 3.0);
    for (auto s : {strat({1, 1}), strat({0, 1})}) {
        ProbeReport r = probe_strong_local(m, payoff, s, {}, 1e-4, 200, 1010);
        if (!r.passed) {
            why = "two-state equilibrium failed the one-step return probe";
            return false;
        }
    }
    return true;
}

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"4-state walk: psi = (0, 2/7, 8/7, 2), mixed equilibrium verified, pure candidates "
         "non-equivalent, purify refused",
         criterion1},
        {"18-state mean-variance: threshold 16 feasible, sign pattern, equilibrium, H routes agree to 1e-10",
         criterion2},
        {"two-state instance: equilibria (1,1) and (0,1) with values (1,2) and (2,2), not equivalent, "
         "enumeration exact",
         criterion3},
        {"no-equilibrium instance: empty enumeration, 4-cycle from every pure start, printed digits to 1e-4",
         criterion4},
        {"variance walks M in {1,2,3,10,100}: closed forms to 1e-10, response identity, M = 3 unstable",
         criterion5},
        {"contraction instance: response map at 100 points to 1e-12, globally stable from corners and "
         "100 starts",
         criterion6},
        {"time-consistent oracle: 100 random chains, pure equilibria match value iteration to 1e-9",
         criterion7},
        {"oracle agreement: series within 1e-8 and simulation within 4 standard errors on 25 instances",
         criterion8},
        {"property suites: one-step recursion everywhere, convex responses at endpoints, binding conditions",
         criterion9},
        {"one-step return probes pass at eps = 1e-4 with 200 samples", criterion10},
    };

    int failures = 0;
    auto t0 = std::chrono::steady_clock::now();
    for (size_t i = 0; i < criteria.size(); ++i) {
        std::string why;
        bool ok = false;
        try {
            ok = criteria[i].check(why);
        } catch (const std::exception& e) {
            why = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %zu: %s%s%s\n", ok ? "PASS" : "FAIL", i + 1,
                    criteria[i].name.c_str(), ok || why.empty() ? "" : " -- ", ok ? "" : why.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    auto t1 = std::chrono::steady_clock::now();
    std::printf("%d/%zu criteria passed in %.1f s\n", static_cast<int>(criteria.size()) - failures,
                criteria.size(), std::chrono::duration<double>(t1 - t0).count());
    return failures == 0 ? 0 : 1;
}
