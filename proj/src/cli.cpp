#include "eqstop/cli.hpp"
#include "eqstop/chain.hpp"
#include "eqstop/dynamics.hpp"
#include "eqstop/equilibrium.hpp"
#include "eqstop/errors.hpp"
#include "eqstop/eval.hpp"
#include "eqstop/model_io.hpp"
#include "eqstop/payoff.hpp"
#include "eqstop/problems.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace eqstop::cli {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// 12 significant digits, locale-independent.
std::string num(double v) {
    if (v == 0.0) v = 0.0; // flush negative zero
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

std::string join(const std::vector<double>& v, char sep = ';') {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        s += num(v[i]);
    }
    return s;
}

double parse_number_token(const std::string& token) {
    std::string t = token;
    t.erase(0, t.find_first_not_of(" \t"));
    t.erase(t.find_last_not_of(" \t") + 1);
    if (t.empty()) throw ParameterError("empty entry in numeric literal");

    auto parse_one = [](const std::string& text) {
        const char* begin = text.data();
        const char* end = begin + text.size();
        double value = 0.0;
        auto res = std::from_chars(begin, end, value);
        if (res.ec != std::errc() || res.ptr != end)
            throw ParameterError("bad numeric literal '" + text + "'");
        return value;
    };
    if (auto slash = t.find('/'); slash != std::string::npos) {
        double a = parse_one(t.substr(0, slash));
        double b = parse_one(t.substr(slash + 1));
        if (b == 0.0) throw ParameterError("rational literal with zero denominator: '" + t + "'");
        return a / b;
    }
    return parse_one(t);
}

struct Instance {
    MarkovModel model;
    std::optional<PayoffSpec> payoff;
};

struct ModelSource {
    std::string path;
    std::string example;

    void add_options(CLI::App* sub) {
        auto* pm = sub->add_option("--model", path, "model JSON file");
        auto* pe = sub->add_option("--example", example,
                                   "canned example, e.g. ex5_1 or variance_walk(5)");
        pm->excludes(pe);
        pe->excludes(pm);
    }

    Instance resolve() const {
        if (!path.empty()) {
            ModelFile file = load_model_file(path);
            return {std::move(file.model), std::move(file.payoff)};
        }
        if (!example.empty()) {
            WorkedExample ex = worked_example(example);
            return {std::move(ex.model), std::move(ex.payoff)};
        }
        throw UsageError("provide exactly one model source: --model FILE or --example NAME");
    }
};

const PayoffSpec& need_payoff(const Instance& inst) {
    if (!inst.payoff)
        throw ParameterError("the model source has no payoff block; add one to the file");
    return *inst.payoff;
}

Strategy strategy_from(const Instance& inst, const std::string& literal, const char* what) {
    if (literal.empty()) throw UsageError(std::string("missing ") + what);
    Strategy s{parse_vector_literal(literal)};
    validate_strategy(inst.model, s, what);
    return s;
}

// Output redirection: data goes to --output when given, stdout otherwise.
struct DataSink {
    std::ofstream file;
    std::ostream* stream = nullptr;

    std::ostream& open(const std::string& path, std::ostream& fallback) {
        if (path.empty()) {
            stream = &fallback;
        } else {
            file.open(path);
            if (!file) throw ParameterError("cannot open output file '" + path + "'");
            stream = &file;
        }
        return *stream;
    }
};

std::string flags_of(const StateCheck& c) {
    std::string s;
    if (c.binds_I) s += "I";
    if (c.binds_II) s += (s.empty() ? "" : "|") + std::string("II");
    if (c.binds_III) s += (s.empty() ? "" : "|") + std::string("III");
    return s.empty() ? "-" : s;
}

void print_check(std::ostream& data, const MarkovModel& model, const EquilibriumReport& report) {
    data << "equilibrium," << (report.is_equilibrium ? "true" : "false") << "\n";
    data << "index,label,gap,slack_I,slack_II,condition_III,second_order_ok,binds,vacuous\n";
    for (int i = 0; i < model.size(); ++i) {
        const StateCheck& c = report.states[static_cast<size_t>(i)];
        data << i << "," << model.state(i).label << "," << num(c.deviation_gap) << ","
             << num(c.slack_I) << "," << num(c.slack_II) << ",";
        if (c.condition_III) data << num(*c.condition_III);
        data << ",";
        if (c.second_order_ok) data << (*c.second_order_ok ? "true" : "false");
        data << "," << flags_of(c) << "," << (c.vacuous ? "true" : "false") << "\n";
    }
    if (!report.note.empty()) data << "# " << report.note << "\n";
}

void print_probe(std::ostream& data, const ProbeReport& report) {
    data << "kind," << report.kind << "\n";
    data << "passed," << (report.passed ? "true" : "false") << "\n";
    data << "samples," << report.samples << "\n";
    data << "failures," << report.failures << "\n";
    data << "seed," << report.seed << "\n";
    data << "epsilon," << num(report.epsilon) << "\n";
    int shown = 0;
    for (size_t i = 0; i < report.detail.size() && shown < 20; ++i) {
        if (!report.detail[i].passed) {
            data << "# sample " << i << ": " << report.detail[i].note << "\n";
            ++shown;
        }
    }
    data << "# " << report.note << "\n";
}

} // namespace

std::vector<double> parse_vector_literal(const std::string& text) {
    std::vector<double> out;
    std::string token;
    std::istringstream in(text);
    while (std::getline(in, token, ',')) out.push_back(parse_number_token(token));
    if (out.empty()) throw ParameterError("empty numeric literal");
    return out;
}

namespace {

struct Options {
    ModelSource source;
    std::string output;
    std::string strategy, start, phi, psi, format = "csv", name;
    int state = 0;
    double q = 0.0;
    double gamma = 0.0;
    double eps = 1e-4;
    double tol = kConvergenceTol;
    int M = 3;
    int b = 0;
    int samples = 100;
    int max_iter = 1000;
    std::int64_t paths = 100000;
    std::uint64_t seed = 1;
    int start_state = 0;
    bool run_all_checks = false;
    bool emit_figure = false;
    std::string export_path;
    std::string kind;
};

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"equilibrium solver for time-inconsistent optimal stopping on finite Markov chains"};
    app.require_subcommand(1);

    Options opt;
    auto add_output = [&](CLI::App* sub) { sub->add_option("--output", opt.output, "write data to a file"); };

    auto* c_validate = app.add_subcommand("validate", "check model invariants");
    opt.source.add_options(c_validate);
    add_output(c_validate);

    auto* c_eval = app.add_subcommand("eval", "expected rewards under a strategy");
    opt.source.add_options(c_eval);
    c_eval->add_option("--strategy", opt.strategy, "stopping probabilities, e.g. 1,1/2,0,1")->required();
    add_output(c_eval);

    auto* c_k = app.add_subcommand("k", "one-shot deviation value K(x,q,p)");
    opt.source.add_options(c_k);
    c_k->add_option("--strategy", opt.strategy)->required();
    c_k->add_option("--state", opt.state, "state index")->required();
    c_k->add_option("--q", opt.q, "deviation stopping probability")->required();
    add_output(c_k);

    auto* c_br = app.add_subcommand("best-response", "per-state argmax of K");
    opt.source.add_options(c_br);
    c_br->add_option("--strategy", opt.strategy)->required();
    add_output(c_br);

    auto* c_check = app.add_subcommand("check", "equilibrium verdict with condition slacks");
    opt.source.add_options(c_check);
    c_check->add_option("--strategy", opt.strategy)->required();
    add_output(c_check);

    auto* c_char = app.add_subcommand("characterize", "verify a (phi, psi) pair solves the coupled system");
    opt.source.add_options(c_char);
    c_char->add_option("--phi", opt.phi, "phi vector literal")->required();
    c_char->add_option("--psi", opt.psi, "psi vector literal")->required();
    add_output(c_char);

    auto* c_enum = app.add_subcommand("enumerate", "all pure equilibria");
    opt.source.add_options(c_enum);
    add_output(c_enum);

    auto* c_purify = app.add_subcommand("purify", "equivalent pure version of a mixed equilibrium");
    opt.source.add_options(c_purify);
    c_purify->add_option("--strategy", opt.strategy)->required();
    add_output(c_purify);

    auto* c_myopic = app.add_subcommand("myopic", "iterate the maximal best response");
    opt.source.add_options(c_myopic);
    c_myopic->add_option("--start", opt.start, "starting strategy literal")->required();
    c_myopic->add_option("--max-iter", opt.max_iter);
    c_myopic->add_option("--tol", opt.tol, "convergence threshold on sup-norm steps");
    add_output(c_myopic);

    auto* c_graph = app.add_subcommand("graph", "pure-strategy response graph");
    opt.source.add_options(c_graph);
    c_graph->add_option("--format", opt.format, "dot or csv")->default_val("dot");
    add_output(c_graph);

    auto* c_stab = app.add_subcommand("stability", "sampled stability certificates");
    opt.source.add_options(c_stab);
    c_stab->add_option("kind", opt.kind, "strong, local or global")->required();
    c_stab->add_option("--strategy", opt.strategy, "equilibrium to probe")->required();
    c_stab->add_option("--eps", opt.eps, "perturbation radius");
    c_stab->add_option("--samples", opt.samples, "perturbations or random starts");
    c_stab->add_option("--seed", opt.seed);
    c_stab->add_option("--max-iter", opt.max_iter);
    add_output(c_stab);

    auto* c_scan = app.add_subcommand("threshold-scan", "feasible mean-variance thresholds");
    opt.source.add_options(c_scan);
    c_scan->add_option("--gamma", opt.gamma, "risk aversion")->required();
    c_scan->add_flag("--emit-figure", opt.emit_figure, "emit i,x_i,H,J rows");
    c_scan->add_option("--b", opt.b, "threshold for --emit-figure (default: first feasible)");
    add_output(c_scan);

    auto* c_var = app.add_subcommand("variance-walk", "closed-form variance-walk equilibrium");
    c_var->add_option("--M", opt.M, "top state of the walk")->required();
    c_var->add_flag("--emit-figure", opt.emit_figure, "emit i,J rows");
    add_output(c_var);

    auto* c_sim = app.add_subcommand("simulate", "Monte Carlo estimate of phi and psi");
    opt.source.add_options(c_sim);
    c_sim->add_option("--strategy", opt.strategy)->required();
    c_sim->add_option("--start", opt.start_state, "start state index")->required();
    c_sim->add_option("--paths", opt.paths);
    c_sim->add_option("--seed", opt.seed);
    add_output(c_sim);

    auto* c_ex = app.add_subcommand("example", "canned instances and their recorded claims");
    c_ex->add_option("name", opt.name, "example name")->required();
    c_ex->add_flag("--run-all-checks", opt.run_all_checks, "verify every recorded claim");
    c_ex->add_option("--export", opt.export_path, "write the instance as a model JSON file ('-' for stdout)");
    add_output(c_ex);

    std::vector<const char*> argv;
    argv.push_back("eqstop");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();

    try {
        DataSink sink;
        std::ostream& data = sink.open(opt.output, out);

        if (command == "validate") {
            Instance inst = opt.source.resolve();
            ValidationReport report = validate(inst.model);
            if (report.ok()) {
                data << "valid\n";
                data << "absorbing,";
                for (size_t i = 0; i < report.absorbing.size(); ++i)
                    data << (i ? ";" : "") << inst.model.state(report.absorbing[i]).label;
                data << "\n";
                return 0;
            }
            for (const std::string& p : report.problems) data << "invalid," << p << "\n";
            return 1;
        }

        if (command == "eval") {
            Instance inst = opt.source.resolve();
            Strategy s = strategy_from(inst, opt.strategy, "--strategy");
            Evaluation e = evaluate(inst.model, need_payoff(inst), s);
            data << "index,label,value,p,phi,psi,J,phi_next,psi_next\n";
            for (int i = 0; i < inst.model.size(); ++i) {
                size_t k = static_cast<size_t>(i);
                data << i << "," << inst.model.state(i).label << "," << num(inst.model.state(i).value)
                     << "," << num(s.p[k]) << "," << num(e.phi[k]) << "," << num(e.psi[k]) << ","
                     << num(e.J[k]) << "," << num(e.phi_next[k]) << "," << num(e.psi_next[k]) << "\n";
            }
            return 0;
        }

        if (command == "k") {
            Instance inst = opt.source.resolve();
            Strategy s = strategy_from(inst, opt.strategy, "--strategy");
            data << num(k_value(inst.model, need_payoff(inst), s, opt.state, opt.q)) << "\n";
            return 0;
        }

        if (command == "best-response") {
            Instance inst = opt.source.resolve();
            Strategy s = strategy_from(inst, opt.strategy, "--strategy");
            BestResponseSet br = best_response(inst.model, need_payoff(inst), s);
            data << "index,label,intervals,maximal,value,flags\n";
            for (int i = 0; i < inst.model.size(); ++i) {
                const StateBestResponse& r = br.states[static_cast<size_t>(i)];
                data << i << "," << inst.model.state(i).label << ",";
                for (size_t j = 0; j < r.intervals.size(); ++j) {
                    if (j) data << "|";
                    data << "[" << num(r.intervals[j].lo) << ";" << num(r.intervals[j].hi) << "]";
                }
                data << "," << num(r.maximal) << "," << num(r.value) << ",";
                std::string flags;
                if (r.vacuous) flags += "vacuous";
                if (r.grid_accurate) flags += std::string(flags.empty() ? "" : "|") + "grid";
                if (r.non_interval()) flags += std::string(flags.empty() ? "" : "|") + "non-interval";
                data << (flags.empty() ? "-" : flags) << "\n";
            }
            return 0;
        }

        if (command == "check") {
            Instance inst = opt.source.resolve();
            Strategy s = strategy_from(inst, opt.strategy, "--strategy");
            print_check(data, inst.model, check_equilibrium(inst.model, need_payoff(inst), s));
            return 0;
        }

        if (command == "characterize") {
            Instance inst = opt.source.resolve();
            CharacterizingResult r = check_characterizing(inst.model, need_payoff(inst),
                                                          parse_vector_literal(opt.phi),
                                                          parse_vector_literal(opt.psi));
            data << "holds," << (r.holds ? "true" : "false") << "\n";
            data << "q_hat," << join(r.q_hat.p) << "\n";
            if (!r.detail.empty()) data << "detail," << r.detail << "\n";
            return 0;
        }

        if (command == "enumerate") {
            Instance inst = opt.source.resolve();
            PureEnumeration pe = enumerate_pure(inst.model, need_payoff(inst));
            if (!pe.warning.empty()) err << "warning: " << pe.warning << "\n";
            data << "count," << pe.equilibria.size() << "\n";
            data << "strategy,J\n";
            for (size_t i = 0; i < pe.equilibria.size(); ++i)
                data << join(pe.equilibria[i].p) << "," << join(pe.evaluations[i].J) << "\n";
            return 0;
        }

        if (command == "purify") {
            Instance inst = opt.source.resolve();
            Strategy s = strategy_from(inst, opt.strategy, "--strategy");
            data << join(purify(inst.model, need_payoff(inst), s).p, ',') << "\n";
            return 0;
        }

        if (command == "myopic") {
            Instance inst = opt.source.resolve();
            Strategy s = strategy_from(inst, opt.start, "--start");
            AdjustmentTrace t = myopic(inst.model, need_payoff(inst), s, opt.max_iter, opt.tol);
            data << "step,delta,p\n";
            const size_t cap = 1000;
            for (size_t i = 0; i < t.iterates.size() && i <= cap; ++i) {
                data << i << ",";
                if (i) data << num(t.deltas[i - 1]);
                data << "," << join(t.iterates[i].p) << "\n";
            }
            if (t.iterates.size() > cap + 1) data << "# truncated after " << cap << " steps\n";
            switch (t.termination) {
                case AdjustmentTrace::Termination::converged:
                    data << "# converged in " << t.deltas.size() << " steps, equilibrium_verified="
                         << (t.equilibrium_verified ? "true" : "false") << "\n";
                    if (!t.verification_note.empty()) data << "# " << t.verification_note << "\n";
                    break;
                case AdjustmentTrace::Termination::cycle:
                    data << "# cycle entry=" << t.cycle_entry << " length=" << t.cycle_length << "\n";
                    break;
                case AdjustmentTrace::Termination::max_iter:
                    data << "# stopped at the iteration cap\n";
                    break;
            }
            return 0;
        }

        if (command == "graph") {
            Instance inst = opt.source.resolve();
            ResponseGraph g = response_graph(inst.model, need_payoff(inst));
            if (opt.format == "dot")
                data << to_dot(g);
            else if (opt.format == "csv")
                data << to_csv(g);
            else
                throw UsageError("graph --format must be dot or csv");
            err << "nodes=" << g.nodes() << " self_loops=" << g.self_loops.size()
                << " acyclic=" << (g.acyclic ? "yes" : "no") << "\n";
            return 0;
        }

        if (command == "stability") {
            Instance inst = opt.source.resolve();
            Strategy s = strategy_from(inst, opt.strategy, "--strategy");
            const PayoffSpec& payoff = need_payoff(inst);
            ProbeReport report;
            if (opt.kind == "strong")
                report = probe_strong_local(inst.model, payoff, s, {}, opt.eps, opt.samples, opt.seed);
            else if (opt.kind == "local")
                report = probe_local(inst.model, payoff, s, opt.eps, opt.samples, opt.max_iter, opt.seed);
            else if (opt.kind == "global")
                report = probe_global(inst.model, payoff, s, opt.samples, opt.seed, opt.max_iter);
            else
                throw UsageError("stability kind must be strong, local or global");
            print_probe(data, report);
            return 0;
        }

        if (command == "threshold-scan") {
            Instance inst = opt.source.resolve();
            std::vector<double> values = inst.model.state_values();
            std::vector<ThresholdReport> feasible = threshold_scan(values, opt.gamma);
            if (opt.emit_figure) {
                int b = opt.b;
                if (b == 0) {
                    if (feasible.empty()) throw ParameterError("no feasible threshold to plot; pass --b");
                    b = feasible.front().b;
                }
                data << threshold_figure_csv(values, opt.gamma, b);
                return 0;
            }
            data << "feasible_b,";
            for (size_t i = 0; i < feasible.size(); ++i) data << (i ? ";" : "") << feasible[i].b;
            data << "\n";
            data << "b,i,x_i,H,H_generic,J\n";
            for (const ThresholdReport& r : feasible) {
                const int n = static_cast<int>(values.size());
                for (int i = 2; i <= n - 1; ++i)
                    data << r.b << "," << i << "," << num(values[static_cast<size_t>(i - 1)]) << ","
                         << num(r.H[static_cast<size_t>(i - 2)]) << ","
                         << num(r.H_generic[static_cast<size_t>(i - 2)]) << ","
                         << num(r.J[static_cast<size_t>(i - 1)]) << "\n";
            }
            return 0;
        }

        if (command == "variance-walk") {
            VarianceWalkSolution sol = variance_walk(opt.M);
            if (opt.emit_figure) {
                data << variance_figure_csv(opt.M);
                return 0;
            }
            data << "strategy," << join(sol.strategy.p) << "\n";
            data << "i,phi,psi,J,phi_next,psi_next\n";
            for (int i = 0; i <= opt.M; ++i) {
                size_t k = static_cast<size_t>(i);
                data << i << "," << num(sol.phi[k]) << "," << num(sol.psi[k]) << "," << num(sol.J[k])
                     << "," << num(sol.phi_next[k]) << "," << num(sol.psi_next[k]) << "\n";
            }
            return 0;
        }

        if (command == "simulate") {
            Instance inst = opt.source.resolve();
            Strategy s = strategy_from(inst, opt.strategy, "--strategy");
            SimulationResult r = simulate(inst.model, need_payoff(inst), s, opt.start_state, opt.paths,
                                          opt.seed);
            data << "phi_hat," << num(r.phi_hat) << "\n";
            data << "psi_hat," << num(r.psi_hat) << "\n";
            data << "phi_se," << num(r.phi_se) << "\n";
            data << "psi_se," << num(r.psi_se) << "\n";
            data << "paths," << r.paths << "\n";
            return 0;
        }

        if (command == "example") {
            WorkedExample ex = worked_example(opt.name);
            if (!opt.export_path.empty()) {
                std::string text = model_to_json(ex.model, &ex.payoff);
                if (opt.export_path == "-") {
                    data << text;
                } else {
                    std::ofstream f(opt.export_path);
                    if (!f) throw ParameterError("cannot open '" + opt.export_path + "'");
                    f << text;
                }
            }
            data << "name," << ex.name << "\n";
            data << "# " << ex.description << "\n";
            if (!opt.run_all_checks) {
                for (size_t i = 0; i < ex.annotations.size(); ++i)
                    data << "claim " << (i + 1) << "," << ex.annotations[i].claim << "\n";
                return 0;
            }
            bool all_ok = true;
            for (const Annotation& a : ex.annotations) {
                std::string detail;
                bool ok = a.verify(detail);
                all_ok = all_ok && ok;
                data << (ok ? "[PASS] " : "[FAIL] ") << a.claim;
                if (!ok && !detail.empty()) data << " -- " << detail;
                data << "\n";
            }
            return all_ok ? 0 : 1;
        }

        throw UsageError("unknown command '" + command + "'");
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int main(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

} // namespace eqstop::cli
