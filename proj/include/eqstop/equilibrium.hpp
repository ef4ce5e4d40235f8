#pragma once

#include "eqstop/chain.hpp"
#include "eqstop/eval.hpp"
#include "eqstop/payoff.hpp"

#include <optional>
#include <string>
#include <vector>

namespace eqstop {

/// Absolute tolerance on one-shot deviation gaps when declaring equilibria.
inline constexpr double kEquilibriumTol = 1e-9;
/// Absolute tolerance on value plateaus in best-response sets.
inline constexpr double kBestResponseTol = 1e-10;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct StateBestResponse {
    std::vector<Interval> intervals; // sorted, disjoint, within [0,1]
    double maximal = 1.0;            // right endpoint of the last interval
    double value = 0.0;              // max_q K(x,q,p)
    bool vacuous = false;            // absorbing state, K constant in q
    bool grid_accurate = false;      // located by grid search only
    /// More than one interval: the maximizer set is not an interval, which is
    /// exactly the situation the fixed-point existence argument excludes.
    bool non_interval() const { return intervals.size() > 1; }
};

struct BestResponseSet {
    std::vector<StateBestResponse> states;
};

/// Per-state argmax of q -> K(x,q,p) over [0,1], computed by declared shape:
/// affine g by endpoint slope, convex g by endpoint comparison with a
/// midpoint constancy test, differentiable concave g by monotone-derivative
/// root finding, anything else by a 4097-point grid with golden-section
/// refinement.
BestResponseSet best_response(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy);

/// Single-state version on the raw constants of K; exposed for the
/// characterizing-equation check and tests.
StateBestResponse best_response_1d(double stop_f, double cont_phi, double stop_h, double cont_psi,
                                   const GDescriptor& g);

struct StateCheck {
    double deviation_gap = 0.0; // max_q K(x,q,p) - K(x,p_x,p), >= 0
    double slack_I = 0.0;       // J(x) - [f(x) + g(h(x))]
    double slack_II = 0.0;      // J(x) - [E_x phi(X_1) + g(E_x psi(X_1))]
    std::optional<double> condition_III; // first-order expression, when g' exists
    std::optional<bool> second_order_ok; // g'' <= tol at mixed entries, when g'' exists
    bool binds_I = false, binds_II = false, binds_III = false;
    bool vacuous = false; // absorbing state
};

struct EquilibriumReport {
    bool is_equilibrium = false;
    std::vector<StateCheck> states;
    Evaluation eval;
    std::string note; // e.g. why derivative-based fields are absent
};

EquilibriumReport check_equilibrium(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy);

struct CharacterizingResult {
    bool holds = false;
    Strategy q_hat;     // maximal maximizer per state
    std::string detail; // first failure, empty when holds
};

/// Verifies that (phi, psi) solve the coupled system: the value at each state
/// equals the best one-shot value, and both recursions hold at the maximal
/// maximizer. When it holds, q_hat is an equilibrium with J = phi + g(psi).
CharacterizingResult check_characterizing(const MarkovModel& model, const PayoffSpec& payoff,
                                          const std::vector<double>& phi, const std::vector<double>& psi);

struct PureEnumeration {
    std::vector<Strategy> equilibria; // lexicographic over non-absorbing entries
    std::vector<Evaluation> evaluations;
    std::string warning; // set when the pure search is not known to be complete
};

/// Checks all pure strategies over the non-absorbing states (absorbing
/// entries pinned to 1, where they are irrelevant). OpenMP-parallel over the
/// strategy space; result order is canonical regardless of worker count.
PureEnumeration enumerate_pure(const MarkovModel& model, const PayoffSpec& payoff);

/// Sequential reference implementation, kept for testing the kernel.
PureEnumeration enumerate_pure_serial(const MarkovModel& model, const PayoffSpec& payoff);

/// For strictly convex g, raises every fractional entry of a verified
/// equilibrium to 1; the result is an equilibrium with the same values.
/// Refused for merely convex g, where a mixed equilibrium can fail to have
/// any pure equivalent.
Strategy purify(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy);

/// True when two verified equilibria share the same value function.
bool equivalent(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& p, const Strategy& q);

/// Classical optimal stopping value for terminal reward f: value iteration
/// V <- max(f, PV) from V = f until the sup-norm change falls below 1e-12.
std::vector<double> optimal_stopping_value(const MarkovModel& model, const std::vector<double>& f);

/// Pure rule induced by the value function: stop where V and f agree.
Strategy optimal_stopping_strategy(const MarkovModel& model, const std::vector<double>& f);

} // namespace eqstop
