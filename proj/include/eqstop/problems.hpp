#pragma once

#include "eqstop/chain.hpp"
#include "eqstop/eval.hpp"
#include "eqstop/payoff.hpp"

#include <functional>
#include <string>
#include <vector>

namespace eqstop {

/// Symmetric +-1 random walk on strictly increasing values with both ends
/// absorbing. Values must start at 0 (the normalization the closed-form
/// threshold analysis assumes).
MarkovModel skipfree_model(const std::vector<double>& values);

/// Stop at and above level b (1-based), continue strictly below; absorbing
/// endpoint entries pinned to 1.
Strategy threshold_strategy(int n, int b);

struct ThresholdReport {
    int b = 0;
    std::vector<double> H;         // closed form, entries for i = 2..N-1 (1-based)
    std::vector<double> H_generic; // same quantity through evaluate()
    double max_route_diff = 0.0;
    bool feasible = false;     // H >= 0 below the threshold, <= 0 from it on
    std::vector<double> J;     // equilibrium values (filled when feasible)
};

/// Closed-form equilibrium indicator for the mean-variance walk, checked
/// against the generic evaluation route. The generic route decides the
/// verdict; a route mismatch is surfaced in max_route_diff, never patched.
ThresholdReport threshold_H(const std::vector<double>& values, double gamma, int b);

/// All feasible thresholds, each with its report.
std::vector<ThresholdReport> threshold_scan(const std::vector<double>& values, double gamma);

struct VarianceWalkSolution {
    int M = 0;
    MarkovModel model;   // walk on {0..M}, 0 absorbing, M reflecting
    PayoffSpec payoff;   // variance rewards
    Strategy strategy;   // (1, 0, ..., 0, 1/(M+1))
    std::vector<double> phi, psi, J, phi_next, psi_next; // closed forms
};

/// Closed-form variance-walk equilibrium; construction re-verifies the
/// equilibrium property and the binding first-order condition at the
/// reflecting state.
VarianceWalkSolution variance_walk(int M);

struct Annotation {
    std::string claim;
    std::function<bool(std::string& detail)> verify;
};

struct WorkedExample {
    std::string name;
    std::string description;
    MarkovModel model;
    PayoffSpec payoff;
    std::vector<Annotation> annotations; // every claimed result, machine-checkable
};

/// Canned worked instances: ex5_1, ex_two_equilibria[(gamma)],
/// ex_no_equilibrium, ex_global_stable, meanvar18, variance_walk[(M)].
WorkedExample worked_example(const std::string& name);

std::vector<std::string> worked_example_names();

/// Figure data: i, x_i, H(x_i, b), J(x_i) for the mean-variance walk.
std::string threshold_figure_csv(const std::vector<double>& values, double gamma, int b);

/// Figure data: i, J(x_i) for the variance walk.
std::string variance_figure_csv(int M);

} // namespace eqstop
