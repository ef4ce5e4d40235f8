#pragma once

#include "eqstop/chain.hpp"
#include "eqstop/payoff.hpp"

#include <cstdint>
#include <vector>

namespace eqstop {

/// Per-state stopping probabilities. The process stops at the first step n
/// whose uniform draw falls below p at the current state.
struct Strategy {
    std::vector<double> p;

    bool is_pure() const {
        for (double v : p)
            if (v != 0.0 && v != 1.0) return false;
        return true;
    }
};

void validate_strategy(const MarkovModel& model, const Strategy& strategy, const char* where);

struct Evaluation {
    std::vector<double> phi;      // E_x[f at stopping]
    std::vector<double> psi;      // E_x[h at stopping]
    std::vector<double> J;        // phi + g(psi)
    std::vector<double> phi_next; // E_x[phi(X_1)]
    std::vector<double> psi_next; // E_x[psi(X_1)]
};

/// Exact evaluation through one dense LU factorization of the transient
/// block. Absorbing entries are set directly to the terminal rewards. The
/// one-step recursion phi = p*f + (1-p)*E[phi(X_1)] is re-checked on the
/// result and a violation is treated as an internal error.
Evaluation evaluate(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy);

/// Value at x of stopping now with probability q and following `strategy`
/// afterwards. Equals J at x when q matches the strategy's entry.
double k_value(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy, int x, double q);

/// Same, reusing a precomputed Evaluation of the strategy.
double k_value(const PayoffSpec& payoff, const Evaluation& eval, int x, double q);

/// Independent oracle: truncated partial sums of the stopped-reward series,
/// propagated as sub-probability mass, with mass already sitting at absorbing
/// states assigned that state's reward. Converges to evaluate() as the
/// truncation grows.
Evaluation evaluate_series(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy,
                           int truncation);

/// Checks the one-step recursion of an Evaluation at every state.
/// Throws NumericalError when violated beyond `tol` (scaled by magnitude).
void assert_one_step_identity(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy,
                              const Evaluation& eval, double tol = 1e-10);

struct SimulationResult {
    double phi_hat = 0.0;
    double psi_hat = 0.0;
    double phi_se = 0.0;
    double psi_se = 0.0;
    std::int64_t paths = 0;
};

/// Monte Carlo oracle. Paths are split into fixed-size shards, each with an
/// RNG stream derived from (seed, shard index), so the result is identical
/// for any worker count. Parallelized with OpenMP.
SimulationResult simulate(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy,
                          int start, std::int64_t paths, std::uint64_t seed);

/// Plain sequential implementation with the same stream derivation; kept as
/// the reference the parallel kernel is tested against.
SimulationResult simulate_reference(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy,
                                    int start, std::int64_t paths, std::uint64_t seed);

} // namespace eqstop
