#include "eqstop/chain.hpp"
#include "eqstop/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <unordered_set>

namespace eqstop {

namespace {

constexpr double kRowSumTol = 1e-12;

std::string describe(int i, const std::vector<StateRecord>& states) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "state %d", i);
    std::string s(buf);
    if (i >= 0 && i < static_cast<int>(states.size())) s += " (" + states[static_cast<size_t>(i)].label + ")";
    return s;
}

} // namespace

MarkovModel::MarkovModel(std::vector<StateRecord> states, std::vector<double> transition_row_major)
    : states_(std::move(states)), transition_(std::move(transition_row_major)) {
    const size_t n = states_.size();
    if (transition_.size() != n * n)
        throw ParameterError("transition matrix size does not match the number of states");
    is_absorbing_.assign(n, false);
    for (size_t i = 0; i < n; ++i) {
        // Absorbing means the row is exactly the unit vector at i; model files
        // must encode absorbing rows exactly.
        bool abs = transition_[i * n + i] == 1.0;
        if (abs) {
            for (size_t j = 0; j < n && abs; ++j)
                if (j != i && transition_[i * n + j] != 0.0) abs = false;
        }
        is_absorbing_[i] = abs;
        if (abs)
            absorbing_.push_back(static_cast<int>(i));
        else
            transient_.push_back(static_cast<int>(i));
    }
}

double MarkovModel::one_step(int i, const std::vector<double>& v) const {
    const size_t n = states_.size();
    double acc = 0.0;
    for (size_t j = 0; j < n; ++j) acc += transition_[static_cast<size_t>(i) * n + j] * v[j];
    return acc;
}

std::vector<double> MarkovModel::state_values() const {
    std::vector<double> v(states_.size());
    for (size_t i = 0; i < states_.size(); ++i) v[i] = states_[i].value;
    return v;
}

ValidationReport validate(const MarkovModel& model) {
    ValidationReport report;
    const int n = model.size();
    if (n < 1) {
        report.problems.push_back("empty state space");
        return report;
    }

    std::unordered_set<std::string> labels;
    for (int i = 0; i < n; ++i) {
        if (!labels.insert(model.state(i).label).second)
            report.problems.push_back("duplicate state label '" + model.state(i).label + "'");
    }

    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            double p = model.prob(i, j);
            if (p < 0.0 || p > 1.0)
                report.problems.push_back(describe(i, model.states()) + ": probability out of [0,1]");
            sum += p;
        }
        // Reject, never renormalize: silent fixes would corrupt exact values.
        if (std::abs(sum - 1.0) > kRowSumTol)
            report.problems.push_back(describe(i, model.states()) + ": row sum deviates from 1 by more than 1e-12");
    }

    report.absorbing = model.absorbing();
    if (report.absorbing.empty()) {
        report.problems.push_back("no absorbing state");
        return report;
    }

    // Reachability on the support graph: from every state some absorbing
    // state must be reachable through edges with positive probability.
    std::vector<bool> reaches(static_cast<size_t>(n), false);
    std::deque<int> queue;
    for (int a : report.absorbing) {
        reaches[static_cast<size_t>(a)] = true;
        queue.push_back(a);
    }
    while (!queue.empty()) {
        int j = queue.front();
        queue.pop_front();
        for (int i = 0; i < n; ++i) {
            if (!reaches[static_cast<size_t>(i)] && model.prob(i, j) > 0.0) {
                reaches[static_cast<size_t>(i)] = true;
                queue.push_back(i);
            }
        }
    }
    for (int i = 0; i < n; ++i)
        if (!reaches[static_cast<size_t>(i)])
            report.problems.push_back(describe(i, model.states()) + ": no absorbing state reachable");

    return report;
}

void require_valid(const MarkovModel& model, const char* where) {
    ValidationReport report = validate(model);
    if (!report.ok()) {
        std::string msg = std::string(where) + ": model invalid:";
        for (const auto& p : report.problems) msg += " [" + p + "]";
        throw PreconditionError(msg);
    }
}

double hit_probability(const MarkovModel& model, const HittingQuery& query) {
    require_valid(model, "hit_probability");
    const int n = model.size();

    auto in_range = [&](int i) { return i >= 0 && i < n; };
    if (!in_range(query.source)) throw ParameterError("hit_probability: source index out of range");

    std::vector<int> role(static_cast<size_t>(n), 0); // 0 interior, 1 target, 2 complement
    for (int t : query.target) {
        if (!in_range(t)) throw ParameterError("hit_probability: target index out of range");
        role[static_cast<size_t>(t)] = 1;
    }
    for (int a : query.complement_absorbing) {
        if (!in_range(a)) throw ParameterError("hit_probability: complement index out of range");
        if (role[static_cast<size_t>(a)] == 1)
            throw ParameterError("hit_probability: target and complement sets must be disjoint");
        role[static_cast<size_t>(a)] = 2;
    }

    if (role[static_cast<size_t>(query.source)] == 1) return 1.0;
    if (role[static_cast<size_t>(query.source)] == 2) return 0.0;

    std::vector<int> interior;
    std::vector<int> pos(static_cast<size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        if (role[static_cast<size_t>(i)] == 0) {
            pos[static_cast<size_t>(i)] = static_cast<int>(interior.size());
            interior.push_back(i);
        }
    }

    const int m = static_cast<int>(interior.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    for (int r = 0; r < m; ++r) {
        int i = interior[static_cast<size_t>(r)];
        A(r, r) = 1.0;
        for (int j = 0; j < n; ++j) {
            double p = model.prob(i, j);
            if (p == 0.0) continue;
            if (role[static_cast<size_t>(j)] == 0)
                A(r, pos[static_cast<size_t>(j)]) -= p;
            else if (role[static_cast<size_t>(j)] == 1)
                b(r) += p;
        }
    }

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw NumericalError("ill-posed hitting query");
    Eigen::VectorXd v = lu.solve(b);
    return v(pos[static_cast<size_t>(query.source)]);
}

MarkovModel with_killing(const MarkovModel& model, double survival) {
    if (!(survival > 0.0 && survival < 1.0))
        throw ParameterError("with_killing: survival probability must lie in (0,1)");

    // Structural validity only; the input need not have absorbing states
    // since the cemetery provides one.
    const int n = model.size();
    if (n < 1) throw ParameterError("with_killing: empty state space");
    for (int i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int j = 0; j < n; ++j) sum += model.prob(i, j);
        if (std::abs(sum - 1.0) > kRowSumTol)
            throw PreconditionError("with_killing: input row sums must equal 1");
    }

    std::vector<StateRecord> states = model.states();
    std::string label = "CEMETERY";
    for (const auto& s : states)
        if (s.label == label) label += "'";
    states.push_back({label, 0.0});

    const size_t m = static_cast<size_t>(n) + 1;
    std::vector<double> t(m * m, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) t[static_cast<size_t>(i) * m + static_cast<size_t>(j)] = survival * model.prob(i, j);
        t[static_cast<size_t>(i) * m + (m - 1)] = 1.0 - survival;
    }
    t[(m - 1) * m + (m - 1)] = 1.0;

    MarkovModel out(std::move(states), std::move(t));
    out.cemetery_ = n;
    return out;
}

} // namespace eqstop
