#pragma once

#include "eqstop/chain.hpp"
#include "eqstop/equilibrium.hpp"
#include "eqstop/eval.hpp"
#include "eqstop/payoff.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace eqstop {

/// Default sup-norm threshold for declaring the adjustment process converged,
/// and the quantum used when hashing iterates for cycle detection (pure
/// iterates are compared exactly; the quantum only matters for mixed ones).
inline constexpr double kConvergenceTol = 1e-12;
inline constexpr double kCycleQuantum = 1e-12;

/// Element-wise maximal best response: the largest vector in the set of best
/// responses, which is well defined because the per-state sets are
/// independent.
Strategy gamma_bar(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy);

struct AdjustmentTrace {
    enum class Termination { converged, cycle, max_iter };

    std::vector<Strategy> iterates; // starting strategy first
    std::vector<double> deltas;     // sup-norm step sizes, one per move
    Termination termination = Termination::max_iter;
    int cycle_entry = -1; // index of the first iterate of the cycle
    int cycle_length = 0;
    /// Convergence means the step fell below the tolerance; whether the limit
    /// actually verifies as an equilibrium is reported separately, never
    /// conflated.
    bool equilibrium_verified = false;
    std::string verification_note;

    const Strategy& last() const { return iterates.back(); }
};

/// Iterates p <- gamma_bar(p) until the step is below `tol`, a quantized
/// iterate recurs (cycle), or `max_iter` steps have been taken.
AdjustmentTrace myopic(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& start,
                       int max_iter, double tol = kConvergenceTol);

struct ResponseGraph {
    std::vector<int> bit_states;     // non-absorbing state indices, bit order
    std::vector<std::int64_t> image; // image mask per node, -1 when mixed
    std::vector<char> mixed_image;   // flag per node
    std::vector<std::int64_t> self_loops;
    bool acyclic = true; // pure-to-pure subgraph, self-loops excluded

    int bits() const { return static_cast<int>(bit_states.size()); }
    std::int64_t nodes() const { return std::int64_t{1} << bits(); }
    std::string label(std::int64_t mask) const;
    Strategy strategy_of(std::int64_t mask, int model_size) const;
};

/// Full best-response graph over the pure strategies (absorbing entries
/// pinned to 1). Nodes whose image is mixed are flagged rather than given an
/// invented edge; the acyclicity verdict covers the pure-to-pure subgraph.
ResponseGraph response_graph(const MarkovModel& model, const PayoffSpec& payoff);
ResponseGraph response_graph_serial(const MarkovModel& model, const PayoffSpec& payoff);

std::string to_dot(const ResponseGraph& graph);
std::string to_csv(const ResponseGraph& graph);

struct ProbeSample {
    bool passed = false;
    std::string note;
};

/// Stability probes are sampled certificates, never proofs: they quantify
/// over finitely many perturbations or starts, with seeds recorded so a
/// verdict can be reproduced.
struct ProbeReport {
    std::string kind;
    bool passed = false;
    int samples = 0;
    int failures = 0;
    std::uint64_t seed = 0;
    double epsilon = 0.0;
    std::vector<ProbeSample> detail;
    std::string note;
};

/// One-step return: for each sampled perturbation within the eps-ball, some
/// equivalent equilibrium (from `equivalents`, the pure matches, or the
/// best-response image itself) must be a best response at every state.
ProbeReport probe_strong_local(const MarkovModel& model, const PayoffSpec& payoff,
                               const Strategy& equilibrium, const std::vector<Strategy>& equivalents,
                               double eps, int samples, std::uint64_t seed);

/// Adjustment-process return: each sampled perturbation must converge back to
/// an equilibrium with the same values.
ProbeReport probe_local(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& equilibrium,
                        double eps, int samples, int max_iter, std::uint64_t seed);

/// Convergence from everywhere: uniform random starts plus every pure corner
/// when there are at most 2^12 of them.
ProbeReport probe_global(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& equilibrium,
                         int starts, std::uint64_t seed, int max_iter);

} // namespace eqstop
