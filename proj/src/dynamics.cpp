#include "eqstop/dynamics.hpp"
#include "eqstop/errors.hpp"
#include "eqstop/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <random>
#include <sstream>

namespace eqstop {

Strategy gamma_bar(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy) {
    BestResponseSet br = best_response(model, payoff, strategy);
    Strategy out;
    out.p.resize(br.states.size());
    for (size_t i = 0; i < br.states.size(); ++i) out.p[i] = br.states[i].maximal;
    return out;
}

namespace {

std::vector<std::int64_t> quantize(const Strategy& s) {
    std::vector<std::int64_t> q(s.p.size());
    for (size_t i = 0; i < s.p.size(); ++i) q[i] = std::llround(s.p[i] / kCycleQuantum);
    return q;
}

double sup_delta(const Strategy& a, const Strategy& b) {
    double d = 0.0;
    for (size_t i = 0; i < a.p.size(); ++i) d = std::max(d, std::abs(a.p[i] - b.p[i]));
    return d;
}

} // namespace

AdjustmentTrace myopic(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& start,
                       int max_iter, double tol) {
    if (max_iter < 1) throw ParameterError("myopic: max_iter must be >= 1");
    require_valid(model, "myopic");
    validate_strategy(model, start, "myopic");

    AdjustmentTrace trace;
    trace.iterates.push_back(start);
    std::map<std::vector<std::int64_t>, int> seen;
    seen[quantize(start)] = 0;

    for (int k = 0; k < max_iter; ++k) {
        Strategy next = gamma_bar(model, payoff, trace.iterates.back());
        double delta = sup_delta(next, trace.iterates.back());
        trace.iterates.push_back(next);
        trace.deltas.push_back(delta);

        if (delta <= tol) {
            trace.termination = AdjustmentTrace::Termination::converged;
            EquilibriumReport check = check_equilibrium(model, payoff, next);
            trace.equilibrium_verified = check.is_equilibrium;
            if (!check.is_equilibrium)
                trace.verification_note = "fixed point within tolerance, equilibrium check failed";
            return trace;
        }
        auto [it, inserted] = seen.emplace(quantize(next), k + 1);
        if (!inserted) {
            trace.termination = AdjustmentTrace::Termination::cycle;
            trace.cycle_entry = it->second;
            trace.cycle_length = (k + 1) - it->second;
            return trace;
        }
    }
    trace.termination = AdjustmentTrace::Termination::max_iter;
    return trace;
}

std::string ResponseGraph::label(std::int64_t mask) const {
    std::string s(static_cast<size_t>(bits()), '0');
    for (int j = 0; j < bits(); ++j)
        if ((mask >> (bits() - 1 - j)) & 1) s[static_cast<size_t>(j)] = '1';
    return s;
}

Strategy ResponseGraph::strategy_of(std::int64_t mask, int model_size) const {
    Strategy s;
    s.p.assign(static_cast<size_t>(model_size), 1.0);
    for (int j = 0; j < bits(); ++j)
        s.p[static_cast<size_t>(bit_states[static_cast<size_t>(j)])] =
            static_cast<double>((mask >> (bits() - 1 - j)) & 1);
    return s;
}

namespace {

ResponseGraph response_graph_impl(const MarkovModel& model, const PayoffSpec& payoff, bool parallel) {
    require_valid(model, "response_graph");
    const auto& transient = model.transient();
    const int k = static_cast<int>(transient.size());
    if (k > 20)
        throw CapabilityError("response_graph supports at most 20 non-absorbing states, got " +
                              std::to_string(k));

    ResponseGraph graph;
    graph.bit_states = transient;
    const std::int64_t total = graph.nodes();
    graph.image.assign(static_cast<size_t>(total), -1);
    graph.mixed_image.assign(static_cast<size_t>(total), 0);

    std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic, 16) num_threads(worker_count()) if (parallel)
    for (std::int64_t mask = 0; mask < total; ++mask) {
        try {
            Strategy s = graph.strategy_of(mask, model.size());
            Strategy img = gamma_bar(model, payoff, s);
            std::int64_t img_mask = 0;
            bool pure = true;
            for (int j = 0; j < k && pure; ++j) {
                double v = img.p[static_cast<size_t>(transient[static_cast<size_t>(j)])];
                if (v == 1.0)
                    img_mask |= std::int64_t{1} << (k - 1 - j);
                else if (v != 0.0)
                    pure = false;
            }
            if (pure)
                graph.image[static_cast<size_t>(mask)] = img_mask;
            else
                graph.mixed_image[static_cast<size_t>(mask)] = 1;
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    for (std::int64_t mask = 0; mask < total; ++mask)
        if (graph.image[static_cast<size_t>(mask)] == mask) graph.self_loops.push_back(mask);

    // Out-degree <= 1, so cycles are found by walking each chain once.
    // Self-loops do not count against acyclicity.
    std::vector<char> color(static_cast<size_t>(total), 0); // 0 new, 1 on path, 2 done
    graph.acyclic = true;
    for (std::int64_t startnode = 0; startnode < total && graph.acyclic; ++startnode) {
        if (color[static_cast<size_t>(startnode)] != 0) continue;
        std::vector<std::int64_t> path;
        std::int64_t node = startnode;
        while (true) {
            if (color[static_cast<size_t>(node)] == 1) {
                graph.acyclic = false;
                break;
            }
            if (color[static_cast<size_t>(node)] == 2) break;
            color[static_cast<size_t>(node)] = 1;
            path.push_back(node);
            std::int64_t next = graph.image[static_cast<size_t>(node)];
            if (next < 0 || next == node) break;
            node = next;
        }
        for (std::int64_t v : path) color[static_cast<size_t>(v)] = 2;
    }
    return graph;
}

} // namespace

ResponseGraph response_graph(const MarkovModel& model, const PayoffSpec& payoff) {
    return response_graph_impl(model, payoff, true);
}

ResponseGraph response_graph_serial(const MarkovModel& model, const PayoffSpec& payoff) {
    return response_graph_impl(model, payoff, false);
}

std::string to_dot(const ResponseGraph& graph) {
    std::ostringstream out;
    out << "digraph response {\n";
    out << "  label=\"acyclic (excluding self-loops): " << (graph.acyclic ? "yes" : "no") << "\";\n";
    for (std::int64_t m = 0; m < graph.nodes(); ++m) {
        out << "  \"" << graph.label(m) << "\"";
        if (graph.mixed_image[static_cast<size_t>(m)]) out << " [style=dashed, comment=\"mixed image\"]";
        out << ";\n";
    }
    for (std::int64_t m = 0; m < graph.nodes(); ++m) {
        std::int64_t img = graph.image[static_cast<size_t>(m)];
        if (img >= 0) out << "  \"" << graph.label(m) << "\" -> \"" << graph.label(img) << "\";\n";
    }
    out << "}\n";
    return out.str();
}

std::string to_csv(const ResponseGraph& graph) {
    std::ostringstream out;
    out << "from,to,kind\n";
    for (std::int64_t m = 0; m < graph.nodes(); ++m) {
        std::int64_t img = graph.image[static_cast<size_t>(m)];
        if (img >= 0)
            out << graph.label(m) << "," << graph.label(img) << ","
                << (img == m ? "self_loop" : "edge") << "\n";
        else
            out << graph.label(m) << ",," << "mixed_image" << "\n";
    }
    return out.str();
}

namespace {

inline double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Strategy perturb(const Strategy& base, double eps, std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{seed, index};
    std::mt19937_64 rng(seq);
    Strategy out = base;
    for (double& v : out.p) {
        v += eps * (2.0 * next_uniform(rng) - 1.0);
        v = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

Strategy random_strategy(int n, std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{seed, index};
    std::mt19937_64 rng(seq);
    Strategy out;
    out.p.resize(static_cast<size_t>(n));
    for (double& v : out.p) v = next_uniform(rng);
    return out;
}

std::vector<double> verified_values(const MarkovModel& model, const PayoffSpec& payoff,
                                    const Strategy& equilibrium, const char* kind) {
    EquilibriumReport r = check_equilibrium(model, payoff, equilibrium);
    if (!r.is_equilibrium)
        throw PreconditionError(std::string(kind) + ": the supplied strategy is not an equilibrium");
    return r.eval.J;
}

bool values_match(const std::vector<double>& a, const std::vector<double>& b) {
    for (size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > kEquilibriumTol) return false;
    return true;
}

// Default equivalence targets: the input plus every pure equilibrium sharing
// its values, when the pure space is small enough to enumerate.
std::vector<Strategy> equivalence_targets(const MarkovModel& model, const PayoffSpec& payoff,
                                          const Strategy& equilibrium, const std::vector<Strategy>& extra,
                                          const std::vector<double>& target_values) {
    std::vector<Strategy> targets;
    targets.push_back(equilibrium);
    for (const Strategy& s : extra) targets.push_back(s);
    if (model.transient().size() <= 16) {
        PureEnumeration pure = enumerate_pure(model, payoff);
        for (size_t i = 0; i < pure.equilibria.size(); ++i)
            if (values_match(pure.evaluations[i].J, target_values))
                targets.push_back(pure.equilibria[i]);
    }
    return targets;
}

template <typename SampleFn>
ProbeReport run_probe(const char* kind, int samples, std::uint64_t seed, double eps, SampleFn&& fn) {
    ProbeReport report;
    report.kind = kind;
    report.samples = samples;
    report.seed = seed;
    report.epsilon = eps;
    report.detail.assign(static_cast<size_t>(samples), {});
    std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(dynamic) num_threads(worker_count())
    for (int i = 0; i < samples; ++i) {
        try {
            report.detail[static_cast<size_t>(i)] = fn(i);
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    for (const ProbeSample& s : report.detail)
        if (!s.passed) ++report.failures;
    report.passed = report.failures == 0;
    return report;
}

} // namespace

ProbeReport probe_strong_local(const MarkovModel& model, const PayoffSpec& payoff,
                               const Strategy& equilibrium, const std::vector<Strategy>& equivalents,
                               double eps, int samples, std::uint64_t seed) {
    if (samples < 1) throw ParameterError("probe_strong_local: samples must be >= 1");
    if (eps < 0.0) throw ParameterError("probe_strong_local: eps must be >= 0");
    std::vector<double> target = verified_values(model, payoff, equilibrium, "probe_strong_local");
    for (const Strategy& s : equivalents)
        if (!equivalent(model, payoff, equilibrium, s))
            throw PreconditionError("probe_strong_local: supplied strategies are not equivalent equilibria");
    std::vector<Strategy> targets = equivalence_targets(model, payoff, equilibrium, equivalents, target);

    const int n = model.size();
    ProbeReport report = run_probe("strong-local", samples, seed, eps, [&](int index) {
        Strategy pert = perturb(equilibrium, eps, seed, static_cast<std::uint64_t>(index));
        Evaluation eval = evaluate(model, payoff, pert);
        BestResponseSet br = best_response(model, payoff, pert);

        auto responds_everywhere = [&](const Strategy& cand) {
            for (int x = 0; x < n; ++x) {
                double gap = br.states[static_cast<size_t>(x)].value -
                             k_value(payoff, eval, x, cand.p[static_cast<size_t>(x)]);
                if (gap > kEquilibriumTol) return false;
            }
            return true;
        };

        ProbeSample sample;
        for (const Strategy& cand : targets)
            if (responds_everywhere(cand)) {
                sample.passed = true;
                return sample;
            }
        // The maximal best response to the perturbation responds by
        // construction; it counts if it is itself an equivalent equilibrium.
        Strategy image;
        image.p.resize(static_cast<size_t>(n));
        for (int x = 0; x < n; ++x) image.p[static_cast<size_t>(x)] = br.states[static_cast<size_t>(x)].maximal;
        EquilibriumReport image_check = check_equilibrium(model, payoff, image);
        if (image_check.is_equilibrium && values_match(image_check.eval.J, target)) {
            sample.passed = true;
            return sample;
        }
        sample.note = "no equivalent equilibrium in the searched set responds to this perturbation";
        return sample;
    });
    report.note = "sampled certificate, not a proof; a failure means no match within the searched set";
    return report;
}

ProbeReport probe_local(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& equilibrium,
                        double eps, int samples, int max_iter, std::uint64_t seed) {
    if (samples < 1) throw ParameterError("probe_local: samples must be >= 1");
    if (eps < 0.0) throw ParameterError("probe_local: eps must be >= 0");
    std::vector<double> target = verified_values(model, payoff, equilibrium, "probe_local");

    ProbeReport report = run_probe("local", samples, seed, eps, [&](int index) {
        Strategy pert = perturb(equilibrium, eps, seed, static_cast<std::uint64_t>(index));
        AdjustmentTrace trace = myopic(model, payoff, pert, max_iter);
        const std::string steps = std::to_string(trace.deltas.size()) + " steps";
        ProbeSample sample;
        if (trace.termination != AdjustmentTrace::Termination::converged) {
            sample.note = trace.termination == AdjustmentTrace::Termination::cycle
                              ? "cycle of length " + std::to_string(trace.cycle_length) + " entered after " +
                                    std::to_string(trace.cycle_entry) + " steps"
                              : "no convergence within " + steps;
            return sample;
        }
        if (!trace.equilibrium_verified) {
            sample.note = trace.verification_note + " (" + steps + ")";
            return sample;
        }
        EquilibriumReport limit = check_equilibrium(model, payoff, trace.last());
        if (!values_match(limit.eval.J, target)) {
            sample.note = "converged in " + steps + " to a non-equivalent equilibrium";
            return sample;
        }
        sample.passed = true;
        sample.note = "converged in " + steps;
        return sample;
    });
    report.note = "sampled certificate, not a proof";
    return report;
}

ProbeReport probe_global(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& equilibrium,
                         int starts, std::uint64_t seed, int max_iter) {
    if (starts < 0) throw ParameterError("probe_global: starts must be >= 0");
    std::vector<double> target = verified_values(model, payoff, equilibrium, "probe_global");

    const int n = model.size();
    std::vector<Strategy> initial;
    if (n <= 12) {
        for (std::int64_t mask = 0; mask < (std::int64_t{1} << n); ++mask) {
            Strategy s;
            s.p.resize(static_cast<size_t>(n));
            for (int j = 0; j < n; ++j)
                s.p[static_cast<size_t>(j)] = static_cast<double>((mask >> (n - 1 - j)) & 1);
            initial.push_back(std::move(s));
        }
    }
    for (int i = 0; i < starts; ++i)
        initial.push_back(random_strategy(n, seed, static_cast<std::uint64_t>(i)));

    ProbeReport report = run_probe("global", static_cast<int>(initial.size()), seed, 0.0, [&](int index) {
        AdjustmentTrace trace = myopic(model, payoff, initial[static_cast<size_t>(index)], max_iter);
        ProbeSample sample;
        if (trace.termination != AdjustmentTrace::Termination::converged) {
            sample.note = "adjustment did not converge from this start";
            return sample;
        }
        if (!trace.equilibrium_verified) {
            sample.note = trace.verification_note;
            return sample;
        }
        EquilibriumReport limit = check_equilibrium(model, payoff, trace.last());
        sample.passed = values_match(limit.eval.J, target);
        if (!sample.passed) sample.note = "converged to a non-equivalent equilibrium";
        return sample;
    });
    report.note = "sampled certificate over " + std::to_string(initial.size() - static_cast<size_t>(starts)) +
                  " pure corners and " + std::to_string(starts) + " random starts";
    return report;
}

} // namespace eqstop
