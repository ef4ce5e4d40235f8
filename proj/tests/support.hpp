#pragma once

// Shared helpers for the test suites: deterministic random instances and
// small builders for the worked chains.

#include "eqstop/chain.hpp"
#include "eqstop/eval.hpp"
#include "eqstop/payoff.hpp"

#include <random>
#include <string>
#include <vector>

namespace eqstop::testing {

inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

/// Random absorbing chain: every transient row keeps a direct edge of weight
/// at least ~0.15 to some absorbing state, so absorption is fast and the
/// transient block is comfortably contractive.
inline MarkovModel random_absorbing_chain(std::mt19937_64& rng, int min_states = 2, int max_states = 8) {
    int n = min_states + static_cast<int>(rng() % static_cast<std::uint64_t>(max_states - min_states + 1));
    int absorbing = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(std::max(1, n / 2)));
    if (absorbing > n) absorbing = n;

    std::vector<StateRecord> states;
    for (int i = 0; i < n; ++i) states.push_back({"s" + std::to_string(i), uniform(rng, -2.0, 2.0)});

    std::vector<double> t(static_cast<size_t>(n) * static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        if (i >= n - absorbing) {
            t[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(i)] = 1.0;
            continue;
        }
        std::vector<double> w(static_cast<size_t>(n), 0.0);
        for (int j = 0; j < n; ++j)
            if (uniform(rng) < 0.6) w[static_cast<size_t>(j)] = uniform(rng, 0.05, 1.0);
        int anchor = n - 1 - static_cast<int>(rng() % static_cast<std::uint64_t>(absorbing));
        w[static_cast<size_t>(anchor)] += 0.5;
        double sum = 0.0;
        for (double v : w) sum += v;
        for (int j = 0; j < n; ++j)
            t[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)] =
                w[static_cast<size_t>(j)] / sum;
    }
    return MarkovModel(std::move(states), std::move(t));
}

inline Strategy random_strategy(std::mt19937_64& rng, int n) {
    Strategy s;
    s.p.resize(static_cast<size_t>(n));
    for (double& v : s.p) v = uniform(rng);
    return s;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, int n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = uniform(rng, lo, hi);
    return v;
}

inline MarkovModel two_cycle_chain() {
    return MarkovModel({{"a", 0.0}, {"b", 1.0}}, {0.0, 1.0, 1.0, 0.0});
}

/// Symmetric walk with absorbing ends on the given values (test-local copy,
/// independent of the library's builders).
inline MarkovModel walk_chain(const std::vector<double>& values) {
    const int n = static_cast<int>(values.size());
    std::vector<StateRecord> states;
    for (int i = 0; i < n; ++i)
        states.push_back({std::to_string(i + 1), values[static_cast<size_t>(i)]});
    std::vector<double> t(static_cast<size_t>(n) * static_cast<size_t>(n), 0.0);
    t[0] = 1.0;
    t[static_cast<size_t>(n) * static_cast<size_t>(n) - 1] = 1.0;
    for (int i = 1; i + 1 < n; ++i) {
        t[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(i - 1)] = 0.5;
        t[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(i + 1)] = 0.5;
    }
    return MarkovModel(std::move(states), std::move(t));
}

inline Strategy strat(std::initializer_list<double> entries) {
    Strategy s;
    s.p.assign(entries.begin(), entries.end());
    return s;
}

} // namespace eqstop::testing
