#include "eqstop/eval.hpp"
#include "eqstop/errors.hpp"
#include "eqstop/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

namespace eqstop {

void validate_strategy(const MarkovModel& model, const Strategy& strategy, const char* where) {
    if (static_cast<int>(strategy.p.size()) != model.size())
        throw ParameterError(std::string(where) + ": strategy length does not match the state count");
    for (double v : strategy.p)
        if (!(v >= 0.0 && v <= 1.0))
            throw ParameterError(std::string(where) + ": stopping probabilities must lie in [0,1]");
}

namespace {

std::vector<double> one_step_all(const MarkovModel& model, const std::vector<double>& v) {
    const int n = model.size();
    std::vector<double> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = model.one_step(i, v);
    return out;
}

// Solves phi = p*f + (1-p)*P*phi given the absorbing entries, for both
// reward vectors with one factorization.
void solve_pair(const MarkovModel& model, const Strategy& s, const std::vector<double>& f,
                const std::vector<double>& h, std::vector<double>& phi, std::vector<double>& psi) {
    const int n = model.size();
    const auto& transient = model.transient();
    const int m = static_cast<int>(transient.size());

    phi.assign(static_cast<size_t>(n), 0.0);
    psi.assign(static_cast<size_t>(n), 0.0);
    for (int a : model.absorbing()) {
        phi[static_cast<size_t>(a)] = f[static_cast<size_t>(a)];
        psi[static_cast<size_t>(a)] = h[static_cast<size_t>(a)];
    }
    if (m == 0) return;

    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, 2);
    for (int r = 0; r < m; ++r) {
        int i = transient[static_cast<size_t>(r)];
        double keep = 1.0 - s.p[static_cast<size_t>(i)];
        A(r, r) += 1.0;
        for (int c = 0; c < m; ++c)
            A(r, c) -= keep * model.prob(i, transient[static_cast<size_t>(c)]);
        double bf = s.p[static_cast<size_t>(i)] * f[static_cast<size_t>(i)];
        double bh = s.p[static_cast<size_t>(i)] * h[static_cast<size_t>(i)];
        for (int a : model.absorbing()) {
            double w = keep * model.prob(i, a);
            bf += w * f[static_cast<size_t>(a)];
            bh += w * h[static_cast<size_t>(a)];
        }
        rhs(r, 0) = bf;
        rhs(r, 1) = bh;
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::MatrixXd sol = lu.solve(rhs);
    if (!sol.allFinite())
        throw NumericalError("evaluate: singular transient system on a valid model");
    sol += lu.solve(rhs - A * sol); // one refinement pass tightens long chains
    for (int r = 0; r < m; ++r) {
        phi[static_cast<size_t>(transient[static_cast<size_t>(r)])] = sol(r, 0);
        psi[static_cast<size_t>(transient[static_cast<size_t>(r)])] = sol(r, 1);
    }
}

} // namespace

void assert_one_step_identity(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy,
                              const Evaluation& eval, double tol) {
    const int n = model.size();
    for (int i = 0; i < n; ++i) {
        size_t k = static_cast<size_t>(i);
        double scale_phi = std::max({1.0, std::abs(eval.phi[k]), std::abs(payoff.f[k])});
        double scale_psi = std::max({1.0, std::abs(eval.psi[k]), std::abs(payoff.h[k])});
        double rphi = eval.phi[k] - (strategy.p[k] * payoff.f[k] + (1.0 - strategy.p[k]) * eval.phi_next[k]);
        double rpsi = eval.psi[k] - (strategy.p[k] * payoff.h[k] + (1.0 - strategy.p[k]) * eval.psi_next[k]);
        if (std::abs(rphi) > tol * scale_phi || std::abs(rpsi) > tol * scale_psi)
            throw NumericalError("one-step recursion violated at state " + model.state(i).label);
    }
}

Evaluation evaluate(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy) {
    require_valid(model, "evaluate");
    validate_strategy(model, strategy, "evaluate");

    Evaluation eval;
    solve_pair(model, strategy, payoff.f, payoff.h, eval.phi, eval.psi);
    eval.phi_next = one_step_all(model, eval.phi);
    eval.psi_next = one_step_all(model, eval.psi);
    eval.J.resize(eval.phi.size());
    for (size_t i = 0; i < eval.phi.size(); ++i) eval.J[i] = eval.phi[i] + g_eval(payoff.g, eval.psi[i]);

    assert_one_step_identity(model, payoff, strategy, eval);
    return eval;
}

double k_value(const PayoffSpec& payoff, const Evaluation& eval, int x, double q) {
    if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("k_value: q must lie in [0,1]");
    size_t i = static_cast<size_t>(x);
    double inner = q * payoff.h[i] + (1.0 - q) * eval.psi_next[i];
    return q * payoff.f[i] + (1.0 - q) * eval.phi_next[i] + g_eval(payoff.g, inner);
}

double k_value(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy, int x, double q) {
    if (x < 0 || x >= model.size()) throw ParameterError("k_value: state index out of range");
    Evaluation eval = evaluate(model, payoff, strategy);
    return k_value(payoff, eval, x, q);
}

Evaluation evaluate_series(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy,
                           int truncation) {
    require_valid(model, "evaluate_series");
    validate_strategy(model, strategy, "evaluate_series");
    if (truncation < 1) throw ParameterError("evaluate_series: truncation must be >= 1");

    const int n = model.size();
    // Partial sums of the stop-time series: mass stopped within k steps picks
    // up its reward, mass parked at an absorbing state is worth that state's
    // reward no matter when (or whether) it formally stops.
    std::vector<double> u(static_cast<size_t>(n), 0.0), v(static_cast<size_t>(n), 0.0);
    for (int a : model.absorbing()) {
        u[static_cast<size_t>(a)] = payoff.f[static_cast<size_t>(a)];
        v[static_cast<size_t>(a)] = payoff.h[static_cast<size_t>(a)];
    }
    std::vector<double> un(u), vn(v);
    for (int step = 0; step < truncation; ++step) {
        for (int i : model.transient()) {
            size_t k = static_cast<size_t>(i);
            double keep = 1.0 - strategy.p[k];
            un[k] = strategy.p[k] * payoff.f[k] + keep * model.one_step(i, u);
            vn[k] = strategy.p[k] * payoff.h[k] + keep * model.one_step(i, v);
        }
        u = un;
        v = vn;
    }

    Evaluation eval;
    eval.phi = u;
    eval.psi = v;
    eval.phi_next = one_step_all(model, eval.phi);
    eval.psi_next = one_step_all(model, eval.psi);
    eval.J.resize(eval.phi.size());
    for (size_t i = 0; i < eval.phi.size(); ++i) eval.J[i] = eval.phi[i] + g_eval(payoff.g, eval.psi[i]);
    return eval;
}

namespace {

constexpr std::int64_t kShardSize = 4096;
constexpr std::int64_t kStepCap = 10'000'000; // guards corrupted inputs only

struct ShardSums {
    double f = 0.0, f2 = 0.0, h = 0.0, h2 = 0.0;
};

inline double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53; // [0,1)
}

using SparseRows = std::vector<std::vector<std::pair<int, double>>>;

SparseRows sparse_rows(const MarkovModel& model) {
    const int n = model.size();
    SparseRows rows(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (double p = model.prob(i, j); p > 0.0) rows[static_cast<size_t>(i)].emplace_back(j, p);
    return rows;
}

ShardSums run_shard(const MarkovModel& model, const SparseRows& rows, const PayoffSpec& payoff,
                    const Strategy& strategy, int start, std::int64_t count, std::uint64_t seed,
                    std::int64_t shard) {
    std::seed_seq seq{static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(shard)};
    std::mt19937_64 rng(seq);
    ShardSums sums;
    for (std::int64_t path = 0; path < count; ++path) {
        int state = start;
        std::int64_t steps = 0;
        for (;;) {
            if (model.is_absorbing(state)) break; // trapped: reward is fixed from here on
            if (next_uniform(rng) < strategy.p[static_cast<size_t>(state)]) break;
            double v = next_uniform(rng);
            const auto& row = rows[static_cast<size_t>(state)];
            double acc = 0.0;
            int next = row.back().first;
            for (const auto& [j, p] : row) {
                acc += p;
                if (v < acc) {
                    next = j;
                    break;
                }
            }
            state = next;
            if (++steps > kStepCap)
                throw NumericalError("simulate: path exceeded the step cap; model is likely corrupted");
        }
        double fw = payoff.f[static_cast<size_t>(state)];
        double hw = payoff.h[static_cast<size_t>(state)];
        sums.f += fw;
        sums.f2 += fw * fw;
        sums.h += hw;
        sums.h2 += hw * hw;
    }
    return sums;
}

SimulationResult combine(const std::vector<ShardSums>& shards, std::int64_t paths) {
    ShardSums total;
    for (const ShardSums& s : shards) { // fixed shard order keeps the sum bit-stable
        total.f += s.f;
        total.f2 += s.f2;
        total.h += s.h;
        total.h2 += s.h2;
    }
    SimulationResult out;
    out.paths = paths;
    double n = static_cast<double>(paths);
    out.phi_hat = total.f / n;
    out.psi_hat = total.h / n;
    if (paths > 1) {
        double var_f = std::max(0.0, (total.f2 - n * out.phi_hat * out.phi_hat) / (n - 1.0));
        double var_h = std::max(0.0, (total.h2 - n * out.psi_hat * out.psi_hat) / (n - 1.0));
        out.phi_se = std::sqrt(var_f / n);
        out.psi_se = std::sqrt(var_h / n);
    }
    return out;
}

void check_sim_args(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy,
                    int start, std::int64_t paths) {
    require_valid(model, "simulate");
    validate_strategy(model, strategy, "simulate");
    (void)payoff;
    if (start < 0 || start >= model.size()) throw ParameterError("simulate: start state out of range");
    if (paths < 1) throw ParameterError("simulate: need at least one path");
}

} // namespace

SimulationResult simulate(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy,
                          int start, std::int64_t paths, std::uint64_t seed) {
    check_sim_args(model, payoff, strategy, start, paths);
    const SparseRows rows = sparse_rows(model);
    const std::int64_t shard_count = (paths + kShardSize - 1) / kShardSize;
    std::vector<ShardSums> shards(static_cast<size_t>(shard_count));
    std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
    for (std::int64_t s = 0; s < shard_count; ++s) {
        try {
            std::int64_t begin = s * kShardSize;
            std::int64_t count = std::min(kShardSize, paths - begin);
            shards[static_cast<size_t>(s)] = run_shard(model, rows, payoff, strategy, start, count, seed, s);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return combine(shards, paths);
}

SimulationResult simulate_reference(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy,
                                    int start, std::int64_t paths, std::uint64_t seed) {
    check_sim_args(model, payoff, strategy, start, paths);
    const SparseRows rows = sparse_rows(model);
    const std::int64_t shard_count = (paths + kShardSize - 1) / kShardSize;
    std::vector<ShardSums> shards(static_cast<size_t>(shard_count));
    for (std::int64_t s = 0; s < shard_count; ++s) {
        std::int64_t begin = s * kShardSize;
        std::int64_t count = std::min(kShardSize, paths - begin);
        shards[static_cast<size_t>(s)] = run_shard(model, rows, payoff, strategy, start, count, seed, s);
    }
    return combine(shards, paths);
}

} // namespace eqstop
