#include "eqstop/equilibrium.hpp"
#include "eqstop/errors.hpp"
#include "eqstop/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>

namespace eqstop {

namespace {

struct KConstants {
    double c1, c2, c3, c4; // K(q) = q*c1 + (1-q)*c2 + g(q*c3 + (1-q)*c4)
    const GDescriptor* g;

    double operator()(double q) const {
        return q * c1 + (1.0 - q) * c2 + g_eval(*g, q * c3 + (1.0 - q) * c4);
    }
    double slope(double q) const { // dK/dq, needs g'
        return (c1 - c2) + g_prime(*g, c4 + q * (c3 - c4)) * (c3 - c4);
    }
};

StateBestResponse single_point(double q, double value) {
    StateBestResponse r;
    r.intervals = {{q, q}};
    r.maximal = q;
    r.value = value;
    return r;
}

StateBestResponse full_interval(double value) {
    StateBestResponse r;
    r.intervals = {{0.0, 1.0}};
    r.maximal = 1.0;
    r.value = value;
    return r;
}

StateBestResponse affine_case(const KConstants& K) {
    double k0 = K(0.0), k1 = K(1.0);
    if (std::abs(k1 - k0) <= kBestResponseTol) return full_interval(std::max(k0, k1));
    return k1 > k0 ? single_point(1.0, k1) : single_point(0.0, k0);
}

StateBestResponse convex_case(const KConstants& K) {
    // Convexity of q -> K(q) pushes the maximum to the endpoints. Equal
    // endpoints mean either a constant K (convex + equal at 0, 1/2, 1 forces
    // constancy) or a genuine two-point argmax.
    double k0 = K(0.0), k1 = K(1.0);
    if (std::abs(k1 - k0) <= kBestResponseTol) {
        double top = std::max(k0, k1);
        if (K(0.5) >= top - kBestResponseTol) return full_interval(top);
        StateBestResponse r;
        r.intervals = {{0.0, 0.0}, {1.0, 1.0}};
        r.maximal = 1.0;
        r.value = top;
        return r;
    }
    return k1 > k0 ? single_point(1.0, k1) : single_point(0.0, k0);
}

// dK/dq is non-increasing for concave g; the argmax is the (possibly
// degenerate) interval where it changes sign.
StateBestResponse concave_case(const KConstants& K, const GDescriptor& g) {
    double d0 = K.slope(0.0), d1 = K.slope(1.0);
    if (d1 > 0.0) return single_point(1.0, K(1.0));
    if (d0 < 0.0) return single_point(0.0, K(0.0));
    if (d0 == 0.0 && d1 == 0.0) return full_interval(K(0.5));

    double lo = 0.0, hi = 1.0;
    if (g.family == GFamily::neg_square) {
        // g'(y) = -2y makes the slope affine in q; solve it directly.
        double delta = K.c3 - K.c4;
        double root = ((K.c1 - K.c2) - 2.0 * K.c4 * delta) / (2.0 * delta * delta);
        root = std::clamp(root, 0.0, 1.0);
        return single_point(root, K(root));
    }

    // Left edge of the argmax: first q with slope <= 0.
    if (d0 == 0.0) {
        lo = 0.0;
    } else {
        double a = 0.0, b = 1.0; // slope(a) > 0 >= slope(b)
        for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
            double mid = 0.5 * (a + b);
            (K.slope(mid) > 0.0 ? a : b) = mid;
        }
        lo = b;
    }
    // Right edge: last q with slope >= 0.
    if (d1 == 0.0) {
        hi = 1.0;
    } else {
        double a = 0.0, b = 1.0; // slope(a) >= 0 > slope(b)
        for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
            double mid = 0.5 * (a + b);
            (K.slope(mid) >= 0.0 ? a : b) = mid;
        }
        hi = a;
    }
    if (hi < lo) hi = lo;
    StateBestResponse r;
    r.intervals = {{lo, hi}};
    r.maximal = hi;
    r.value = K(0.5 * (lo + hi));
    return r;
}

constexpr int kGridCells = 4096; // 4097 sample points

StateBestResponse grid_case(const KConstants& K) {
    std::vector<double> vals(kGridCells + 1);
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kGridCells; ++i) {
        vals[static_cast<size_t>(i)] = K(static_cast<double>(i) / kGridCells);
        best = std::max(best, vals[static_cast<size_t>(i)]);
    }

    StateBestResponse r;
    r.grid_accurate = true;
    const double dq = 1.0 / kGridCells;
    int i = 0;
    while (i <= kGridCells) {
        if (vals[static_cast<size_t>(i)] >= best - kBestResponseTol) {
            int j = i;
            while (j + 1 <= kGridCells && vals[static_cast<size_t>(j + 1)] >= best - kBestResponseTol) ++j;
            r.intervals.push_back({i * dq, j * dq});
            i = j + 1;
        } else {
            ++i;
        }
    }

    // Golden-section sharpening of the value around every grid plateau; the
    // reported intervals stay at grid resolution.
    double refined = best;
    const double inv_phi = 0.6180339887498949;
    for (const Interval& iv : r.intervals) {
        double a = std::max(0.0, iv.lo - dq), b = std::min(1.0, iv.hi + dq);
        double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
        double f1 = K(x1), f2 = K(x2);
        for (int it = 0; it < 100 && b - a > 1e-12; ++it) {
            if (f1 < f2) {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + inv_phi * (b - a);
                f2 = K(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - inv_phi * (b - a);
                f1 = K(x1);
            }
        }
        refined = std::max({refined, f1, f2});
    }
    r.value = refined;
    r.maximal = r.intervals.back().hi;
    return r;
}

} // namespace

StateBestResponse best_response_1d(double stop_f, double cont_phi, double stop_h, double cont_psi,
                                   const GDescriptor& g) {
    KConstants K{stop_f, cont_phi, stop_h, cont_psi, &g};
    switch (g.shape) {
        case GShape::affine: return affine_case(K);
        case GShape::convex:
        case GShape::strictly_convex: return convex_case(K);
        case GShape::concave:
            if (g.differentiability >= 1) return concave_case(K, g);
            return grid_case(K);
        case GShape::general: return grid_case(K);
    }
    throw ParameterError("unknown g shape");
}

namespace {

BestResponseSet best_response_with_eval(const MarkovModel& model, const PayoffSpec& payoff,
                                        const Evaluation& eval) {
    const int n = model.size();
    BestResponseSet out;
    out.states.resize(static_cast<size_t>(n));
    for (int x = 0; x < n; ++x) {
        size_t i = static_cast<size_t>(x);
        if (model.is_absorbing(x)) {
            // K does not depend on q at absorbing states.
            StateBestResponse r = full_interval(k_value(payoff, eval, x, 1.0));
            r.vacuous = true;
            out.states[i] = r;
        } else {
            out.states[i] = best_response_1d(payoff.f[i], eval.phi_next[i], payoff.h[i], eval.psi_next[i],
                                             payoff.g);
        }
    }
    return out;
}

} // namespace

BestResponseSet best_response(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy) {
    Evaluation eval = evaluate(model, payoff, strategy);
    return best_response_with_eval(model, payoff, eval);
}

EquilibriumReport check_equilibrium(const MarkovModel& model, const PayoffSpec& payoff,
                                    const Strategy& strategy) {
    EquilibriumReport report;
    report.eval = evaluate(model, payoff, strategy);
    BestResponseSet br = best_response_with_eval(model, payoff, report.eval);

    const int n = model.size();
    report.states.resize(static_cast<size_t>(n));
    report.is_equilibrium = true;
    const bool has_prime = payoff.g.differentiability >= 1;
    const bool has_second = payoff.g.differentiability >= 2;
    if (!has_prime)
        report.note = "first-order condition omitted: g does not guarantee derivatives";

    for (int x = 0; x < n; ++x) {
        size_t i = static_cast<size_t>(x);
        StateCheck& c = report.states[i];
        c.vacuous = model.is_absorbing(x);
        double k_here = k_value(payoff, report.eval, x, strategy.p[i]);
        c.deviation_gap = std::max(0.0, br.states[i].value - k_here);
        if (c.deviation_gap > kEquilibriumTol) report.is_equilibrium = false;

        c.slack_I = report.eval.J[i] - (payoff.f[i] + g_eval(payoff.g, payoff.h[i]));
        c.slack_II = report.eval.J[i] -
                     (report.eval.phi_next[i] + g_eval(payoff.g, report.eval.psi_next[i]));
        c.binds_I = std::abs(c.slack_I) <= kEquilibriumTol;
        c.binds_II = std::abs(c.slack_II) <= kEquilibriumTol;
        if (has_prime) {
            double inner = strategy.p[i] * payoff.h[i] + (1.0 - strategy.p[i]) * report.eval.psi_next[i];
            double first_order = payoff.f[i] - report.eval.phi_next[i] +
                                 g_prime(payoff.g, inner) * (payoff.h[i] - report.eval.psi_next[i]);
            c.condition_III = first_order;
            c.binds_III = std::abs(first_order) <= kEquilibriumTol;
        }
        if (has_second && strategy.p[i] > 0.0 && strategy.p[i] < 1.0) {
            double inner = strategy.p[i] * payoff.h[i] + (1.0 - strategy.p[i]) * report.eval.psi_next[i];
            c.second_order_ok = g_second(payoff.g, inner) <= kEquilibriumTol;
        }
    }
    return report;
}

CharacterizingResult check_characterizing(const MarkovModel& model, const PayoffSpec& payoff,
                                          const std::vector<double>& phi, const std::vector<double>& psi) {
    require_valid(model, "check_characterizing");
    const int n = model.size();
    if (static_cast<int>(phi.size()) != n || static_cast<int>(psi.size()) != n)
        throw ParameterError("check_characterizing: phi and psi must have one entry per state");

    CharacterizingResult result;
    result.q_hat.p.assign(static_cast<size_t>(n), 1.0);
    result.holds = true;
    for (int x = 0; x < n; ++x) {
        size_t i = static_cast<size_t>(x);
        double cont_phi = model.one_step(x, phi);
        double cont_psi = model.one_step(x, psi);
        StateBestResponse br = best_response_1d(payoff.f[i], cont_phi, payoff.h[i], cont_psi, payoff.g);
        double lhs = phi[i] + g_eval(payoff.g, psi[i]);
        double q = br.maximal;
        result.q_hat.p[i] = q;

        auto fail = [&](const std::string& what) {
            if (result.holds) result.detail = what + " at state " + model.state(x).label;
            result.holds = false;
        };
        if (std::abs(lhs - br.value) > kEquilibriumTol * std::max({1.0, std::abs(lhs), std::abs(br.value)}))
            fail("value equation fails");
        double rec_phi = q * payoff.f[i] + (1.0 - q) * cont_phi;
        double rec_psi = q * payoff.h[i] + (1.0 - q) * cont_psi;
        if (std::abs(phi[i] - rec_phi) > kEquilibriumTol * std::max(1.0, std::abs(phi[i])))
            fail("phi recursion fails");
        if (std::abs(psi[i] - rec_psi) > kEquilibriumTol * std::max(1.0, std::abs(psi[i])))
            fail("psi recursion fails");
    }
    return result;
}

namespace {

Strategy mask_strategy(const MarkovModel& model, std::int64_t mask) {
    // Bit 0 of the mask drives the LAST non-absorbing state so that ascending
    // masks enumerate strategies in lexicographic order.
    const auto& transient = model.transient();
    const int k = static_cast<int>(transient.size());
    Strategy s;
    s.p.assign(static_cast<size_t>(model.size()), 1.0);
    for (int j = 0; j < k; ++j)
        s.p[static_cast<size_t>(transient[static_cast<size_t>(j)])] =
            static_cast<double>((mask >> (k - 1 - j)) & 1);
    return s;
}

PureEnumeration enumerate_impl(const MarkovModel& model, const PayoffSpec& payoff, bool parallel) {
    require_valid(model, "enumerate_pure");
    const int k = static_cast<int>(model.transient().size());
    if (k > 30)
        throw CapabilityError("enumerate_pure supports at most 30 non-absorbing states, got " +
                              std::to_string(k));

    PureEnumeration out;
    if (payoff.g.shape != GShape::strictly_convex && payoff.g.shape != GShape::affine)
        out.warning = "pure enumeration is exhaustive only for strictly convex or affine g; "
                      "equilibria outside the pure class may exist";

    const std::int64_t total = std::int64_t{1} << k;
    std::vector<std::pair<std::int64_t, Evaluation>> found;
    std::exception_ptr failure = nullptr;

    if (parallel) {
#pragma omp parallel num_threads(worker_count())
        {
            std::vector<std::pair<std::int64_t, Evaluation>> local;
#pragma omp for schedule(dynamic, 64) nowait
            for (std::int64_t mask = 0; mask < total; ++mask) {
                try {
                    Strategy s = mask_strategy(model, mask);
                    EquilibriumReport r = check_equilibrium(model, payoff, s);
                    if (r.is_equilibrium) local.emplace_back(mask, std::move(r.eval));
                } catch (...) {
#pragma omp critical
                    if (!failure) failure = std::current_exception();
                }
            }
#pragma omp critical
            found.insert(found.end(), std::make_move_iterator(local.begin()),
                         std::make_move_iterator(local.end()));
        }
    } else {
        for (std::int64_t mask = 0; mask < total; ++mask) {
            Strategy s = mask_strategy(model, mask);
            EquilibriumReport r = check_equilibrium(model, payoff, s);
            if (r.is_equilibrium) found.emplace_back(mask, std::move(r.eval));
        }
    }
    if (failure) std::rethrow_exception(failure);

    std::sort(found.begin(), found.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [mask, eval] : found) {
        out.equilibria.push_back(mask_strategy(model, mask));
        out.evaluations.push_back(std::move(eval));
    }
    return out;
}

} // namespace

PureEnumeration enumerate_pure(const MarkovModel& model, const PayoffSpec& payoff) {
    return enumerate_impl(model, payoff, true);
}

PureEnumeration enumerate_pure_serial(const MarkovModel& model, const PayoffSpec& payoff) {
    return enumerate_impl(model, payoff, false);
}

Strategy purify(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& strategy) {
    if (payoff.g.shape != GShape::strictly_convex)
        throw CapabilityError(
            "purify requires strictly convex g; with merely convex g a mixed equilibrium can have no "
            "pure equivalent (4-state symmetric walk, f = 0, h = (0,0,1,2), g(y) = max(y-1,0): "
            "(1,1/2,0,1) is an equilibrium with no equivalent pure one)");
    EquilibriumReport before = check_equilibrium(model, payoff, strategy);
    if (!before.is_equilibrium)
        throw PreconditionError("purify: input strategy is not an equilibrium");

    Strategy out = strategy;
    bool changed = false;
    for (double& v : out.p)
        if (v > 0.0 && v < 1.0) {
            v = 1.0;
            changed = true;
        }
    if (!changed) return out;

    EquilibriumReport after = check_equilibrium(model, payoff, out);
    bool same_values = true;
    for (size_t i = 0; i < before.eval.J.size(); ++i)
        if (std::abs(before.eval.J[i] - after.eval.J[i]) > kEquilibriumTol) same_values = false;
    if (!after.is_equilibrium || !same_values)
        throw NumericalError("purify: raised strategy failed the equilibrium/value postcondition");
    return out;
}

bool equivalent(const MarkovModel& model, const PayoffSpec& payoff, const Strategy& p, const Strategy& q) {
    EquilibriumReport rp = check_equilibrium(model, payoff, p);
    EquilibriumReport rq = check_equilibrium(model, payoff, q);
    if (!rp.is_equilibrium || !rq.is_equilibrium)
        throw PreconditionError("equivalent: both strategies must be equilibria");
    for (size_t i = 0; i < rp.eval.J.size(); ++i)
        if (std::abs(rp.eval.J[i] - rq.eval.J[i]) > kEquilibriumTol) return false;
    return true;
}

std::vector<double> optimal_stopping_value(const MarkovModel& model, const std::vector<double>& f) {
    require_valid(model, "optimal_stopping_value");
    if (static_cast<int>(f.size()) != model.size())
        throw ParameterError("optimal_stopping_value: reward length must match the state count");

    std::vector<double> v = f, w(f.size());
    const int n = model.size();
    for (long iter = 0; iter < 1'000'000; ++iter) {
        double delta = 0.0;
        for (int i = 0; i < n; ++i) {
            size_t k = static_cast<size_t>(i);
            w[k] = std::max(f[k], model.one_step(i, v));
            delta = std::max(delta, std::abs(w[k] - v[k]));
        }
        v.swap(w);
        if (delta <= 1e-12) return v;
    }
    throw NumericalError("optimal_stopping_value: value iteration failed to settle");
}

Strategy optimal_stopping_strategy(const MarkovModel& model, const std::vector<double>& f) {
    std::vector<double> v = optimal_stopping_value(model, f);
    Strategy s;
    s.p.assign(f.size(), 0.0);
    for (int i = 0; i < model.size(); ++i) {
        size_t k = static_cast<size_t>(i);
        double tol = 1e-9 * std::max(1.0, std::abs(v[k]));
        s.p[k] = (model.is_absorbing(i) || v[k] - f[k] <= tol) ? 1.0 : 0.0;
    }
    return s;
}

} // namespace eqstop
