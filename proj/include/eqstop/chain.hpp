#pragma once

#include <optional>
#include <string>
#include <vector>

namespace eqstop {

struct StateRecord {
    std::string label;
    double value = 0.0; // numeric state value x_i, used by value-based payoffs
};

/// Finite Markov chain with a row-stochastic one-step matrix. Absorbing
/// states (row equal to a unit vector, exact equality) are classified at
/// construction. Immutable after construction; safe to share across threads.
class MarkovModel {
public:
    MarkovModel() = default;
    MarkovModel(std::vector<StateRecord> states, std::vector<double> transition_row_major);

    int size() const { return static_cast<int>(states_.size()); }
    const std::vector<StateRecord>& states() const { return states_; }
    const StateRecord& state(int i) const { return states_[static_cast<size_t>(i)]; }

    double prob(int i, int j) const { return transition_[static_cast<size_t>(i) * states_.size() + static_cast<size_t>(j)]; }
    const std::vector<double>& transition() const { return transition_; }

    bool is_absorbing(int i) const { return is_absorbing_[static_cast<size_t>(i)]; }
    const std::vector<int>& absorbing() const { return absorbing_; }
    const std::vector<int>& transient() const { return transient_; }

    /// Index of the cemetery state when the model came out of with_killing.
    std::optional<int> cemetery() const { return cemetery_; }

    /// E_i[v(X_1)] for a vector v over states.
    double one_step(int i, const std::vector<double>& v) const;

    std::vector<double> state_values() const;

    friend MarkovModel with_killing(const MarkovModel&, double);

private:
    std::vector<StateRecord> states_;
    std::vector<double> transition_; // row-major N*N
    std::vector<bool> is_absorbing_;
    std::vector<int> absorbing_;
    std::vector<int> transient_;
    std::optional<int> cemetery_;
};

struct ValidationReport {
    std::vector<std::string> problems;
    std::vector<int> absorbing; // classified set, also attached when invalid
    bool ok() const { return problems.empty(); }
};

/// Checks every model invariant: row sums within 1e-12 of one, unique labels,
/// nonempty absorbing set, absorption reachable from every state. All
/// violations are reported, none thrown.
ValidationReport validate(const MarkovModel& model);

struct HittingQuery {
    int source = 0;
    std::vector<int> target;              // T
    std::vector<int> complement_absorbing; // A, treated as losing boundary
};

/// P(hit T before A | X_0 = source), by solving the harmonic system on the
/// states outside T and A. Throws NumericalError("ill-posed hitting query")
/// when T u A is not reached almost surely.
double hit_probability(const MarkovModel& model, const HittingQuery& query);

/// Geometric killing: adds a cemetery state (value 0, absorbing), scales all
/// transition probabilities by `survival` and routes the remaining 1-survival
/// mass to the cemetery. Rewards at the cemetery must be zero; downstream
/// payoff construction enforces that through MarkovModel::cemetery().
MarkovModel with_killing(const MarkovModel& model, double survival);

void require_valid(const MarkovModel& model, const char* where);

} // namespace eqstop
