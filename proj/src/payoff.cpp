#include "eqstop/payoff.hpp"
#include "eqstop/errors.hpp"

#include <algorithm>
#include <cmath>

namespace eqstop {

namespace {

size_t piece_index(const GDescriptor& g, double y) {
    // Right-hand piece at breakpoints: piece j covers [b_{j-1}, b_j).
    return static_cast<size_t>(std::upper_bound(g.breakpoints.begin(), g.breakpoints.end(), y) -
                               g.breakpoints.begin());
}

double poly_eval(const std::vector<double>& c, double y, int derivative) {
    double acc = 0.0;
    for (size_t k = c.size(); k-- > 0;) {
        double factor = 1.0;
        bool vanishes = false;
        for (int d = 0; d < derivative; ++d) {
            if (static_cast<int>(k) - d <= 0) { vanishes = true; break; }
            factor *= static_cast<double>(static_cast<int>(k) - d);
        }
        if (vanishes) continue;
        int power = static_cast<int>(k) - derivative;
        acc += c[k] * factor * std::pow(y, power);
    }
    return acc;
}

void require_order(const GDescriptor& g, int order) {
    if (g.differentiability < order)
        throw CapabilityError("g does not guarantee derivatives of order " + std::to_string(order) +
                              " (declared " + std::to_string(g.differentiability) + ")");
}

} // namespace

GDescriptor g_zero() {
    GDescriptor g;
    g.family = GFamily::zero;
    g.shape = GShape::affine;
    g.differentiability = 2;
    return g;
}

GDescriptor g_affine(double slope, double intercept) {
    GDescriptor g;
    g.family = GFamily::affine;
    g.shape = GShape::affine;
    g.differentiability = 2;
    g.slope = slope;
    g.intercept = intercept;
    return g;
}

GDescriptor g_mean_variance(double gamma) {
    if (!(gamma > 0.0)) throw ParameterError("mean_variance requires gamma > 0");
    GDescriptor g;
    g.family = GFamily::mean_variance;
    g.shape = GShape::strictly_convex;
    g.differentiability = 2;
    g.gamma = gamma;
    return g;
}

GDescriptor g_neg_square() {
    GDescriptor g;
    g.family = GFamily::neg_square;
    g.shape = GShape::concave;
    g.differentiability = 2;
    return g;
}

GDescriptor g_shifted_positive_part(double shift) {
    GDescriptor g;
    g.family = GFamily::shifted_positive_part;
    g.shape = GShape::convex;
    g.differentiability = 0;
    g.shift = shift;
    return g;
}

GDescriptor g_piecewise(std::vector<double> breakpoints, std::vector<std::vector<double>> coefficients,
                        GShape shape, int differentiability) {
    if (coefficients.size() != breakpoints.size() + 1)
        throw ParameterError("piecewise polynomial needs one coefficient list per piece (breakpoints + 1)");
    if (!std::is_sorted(breakpoints.begin(), breakpoints.end(),
                        [](double a, double b) { return a <= b; }))
        throw ParameterError("piecewise breakpoints must be strictly increasing");
    for (const auto& c : coefficients)
        if (c.empty()) throw ParameterError("piecewise coefficient lists must be nonempty");
    if (differentiability < 0 || differentiability > 2)
        throw ParameterError("differentiability must be 0, 1 or 2");
    GDescriptor g;
    g.family = GFamily::piecewise_polynomial;
    g.shape = shape;
    g.differentiability = differentiability;
    g.breakpoints = std::move(breakpoints);
    g.coefficients = std::move(coefficients);
    return g;
}

double g_eval(const GDescriptor& g, double y) {
    switch (g.family) {
        case GFamily::zero: return 0.0;
        case GFamily::affine: return g.slope * y + g.intercept;
        case GFamily::mean_variance: return y + g.gamma * y * y;
        case GFamily::neg_square: return -y * y;
        case GFamily::shifted_positive_part: return std::max(y - g.shift, 0.0);
        case GFamily::piecewise_polynomial: return poly_eval(g.coefficients[piece_index(g, y)], y, 0);
    }
    throw ParameterError("unknown g family");
}

double g_prime(const GDescriptor& g, double y) {
    require_order(g, 1);
    switch (g.family) {
        case GFamily::zero: return 0.0;
        case GFamily::affine: return g.slope;
        case GFamily::mean_variance: return 1.0 + 2.0 * g.gamma * y;
        case GFamily::neg_square: return -2.0 * y;
        case GFamily::shifted_positive_part: return y > g.shift ? 1.0 : 0.0; // unreachable: order 0
        case GFamily::piecewise_polynomial: return poly_eval(g.coefficients[piece_index(g, y)], y, 1);
    }
    throw ParameterError("unknown g family");
}

double g_second(const GDescriptor& g, double y) {
    require_order(g, 2);
    switch (g.family) {
        case GFamily::zero: return 0.0;
        case GFamily::affine: return 0.0;
        case GFamily::mean_variance: return 2.0 * g.gamma;
        case GFamily::neg_square: return -2.0;
        case GFamily::shifted_positive_part: return 0.0; // unreachable: order 0
        case GFamily::piecewise_polynomial: return poly_eval(g.coefficients[piece_index(g, y)], y, 2);
    }
    throw ParameterError("unknown g family");
}

std::string verify_shape(const GDescriptor& g, double lo, double hi) {
    switch (g.family) {
        case GFamily::zero:
        case GFamily::affine:
            return g.shape == GShape::affine ? "" : "affine family must declare shape affine";
        case GFamily::mean_variance:
            return g.shape == GShape::strictly_convex ? "" : "mean_variance must declare shape strictly_convex";
        case GFamily::neg_square:
            return g.shape == GShape::concave ? "" : "neg_square must declare shape concave";
        case GFamily::shifted_positive_part:
            return g.shape == GShape::convex ? "" : "shifted_positive_part must declare shape convex";
        case GFamily::piecewise_polynomial: break;
        default: return "unknown g family";
    }
    if (g.shape == GShape::general) return "";

    if (!(hi >= lo)) std::swap(lo, hi);
    if (hi == lo) return "";
    const int samples = 10000;
    const double step = (hi - lo) / samples;
    // Pin the strictness threshold to the sampled curvature scale.
    double max_abs = 0.0;
    for (int i = 0; i <= samples; ++i)
        max_abs = std::max(max_abs, std::abs(g_eval(g, lo + i * step)));
    const double tol = 1e-9 * std::max(1.0, max_abs);

    bool convex_ok = true, concave_ok = true, affine_ok = true, strict_convex_ok = true;
    for (int i = 1; i < samples; ++i) {
        double y = lo + i * step;
        double d2 = g_eval(g, y - step) - 2.0 * g_eval(g, y) + g_eval(g, y + step);
        if (d2 < -tol) { convex_ok = false; strict_convex_ok = false; }
        if (d2 > tol) concave_ok = false;
        if (std::abs(d2) > tol) affine_ok = false;
        if (d2 <= 0.0) strict_convex_ok = false;
    }
    switch (g.shape) {
        case GShape::affine:
            return affine_ok ? "" : "declared affine but sampled second differences are nonzero";
        case GShape::convex:
            return convex_ok ? "" : "declared convex but sampled second differences go negative";
        case GShape::strictly_convex:
            return strict_convex_ok ? "" : "declared strictly_convex but sampled second differences are not strictly positive";
        case GShape::concave:
            return concave_ok ? "" : "declared concave but sampled second differences go positive";
        case GShape::general: return "";
    }
    return "unknown shape";
}

PayoffSpec make_payoff(const MarkovModel& model, std::vector<double> f, std::vector<double> h, GDescriptor g) {
    const size_t n = static_cast<size_t>(model.size());
    if (f.size() != n || h.size() != n)
        throw ParameterError("payoff vectors must have one entry per state");
    if (auto cem = model.cemetery()) {
        size_t c = static_cast<size_t>(*cem);
        if (f[c] != 0.0 || h[c] != 0.0)
            throw ParameterError("killed models require f and h to vanish at the cemetery state");
        if (std::abs(g_eval(g, 0.0)) > 1e-12)
            throw ParameterError("killed models require g(0) = 0");
    }
    double lo = *std::min_element(h.begin(), h.end());
    double hi = *std::max_element(h.begin(), h.end());
    // Every argument ever passed to g is a convex combination of h values,
    // so the attainable interval is all that gets checked.
    std::string problem = verify_shape(g, lo, hi);
    if (!problem.empty())
        throw ParameterError("g shape declaration rejected: " + problem);
    return PayoffSpec{std::move(f), std::move(h), std::move(g)};
}

PayoffSpec make_mean_variance(const MarkovModel& model, double gamma) {
    if (!(gamma > 0.0)) throw ParameterError("make_mean_variance requires gamma > 0");
    const int n = model.size();
    std::vector<double> f(static_cast<size_t>(n)), h(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = model.state(i).value;
        f[static_cast<size_t>(i)] = -gamma * x * x;
        h[static_cast<size_t>(i)] = x;
    }
    PayoffSpec spec = make_payoff(model, std::move(f), std::move(h), g_mean_variance(gamma));
    for (int i = 0; i < n; ++i) {
        double x = model.state(i).value;
        double identity = spec.f[static_cast<size_t>(i)] + g_eval(spec.g, spec.h[static_cast<size_t>(i)]);
        if (std::abs(identity - x) > 1e-9 * std::max(1.0, std::abs(x)))
            throw NumericalError("mean-variance self-check failed: f + g(h) != x");
    }
    return spec;
}

PayoffSpec make_variance(const MarkovModel& model) {
    const int n = model.size();
    std::vector<double> f(static_cast<size_t>(n)), h(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = model.state(i).value;
        f[static_cast<size_t>(i)] = x * x;
        h[static_cast<size_t>(i)] = x;
    }
    PayoffSpec spec = make_payoff(model, std::move(f), std::move(h), g_neg_square());
    for (int i = 0; i < n; ++i) {
        double identity = spec.f[static_cast<size_t>(i)] + g_eval(spec.g, spec.h[static_cast<size_t>(i)]);
        if (identity != 0.0)
            throw NumericalError("variance self-check failed: f + g(h) != 0");
    }
    return spec;
}

const char* to_string(GFamily family) {
    switch (family) {
        case GFamily::zero: return "zero";
        case GFamily::affine: return "affine";
        case GFamily::mean_variance: return "mean_variance";
        case GFamily::neg_square: return "neg_square";
        case GFamily::shifted_positive_part: return "shifted_positive_part";
        case GFamily::piecewise_polynomial: return "piecewise_polynomial";
    }
    return "?";
}

const char* to_string(GShape shape) {
    switch (shape) {
        case GShape::affine: return "affine";
        case GShape::convex: return "convex";
        case GShape::strictly_convex: return "strictly_convex";
        case GShape::concave: return "concave";
        case GShape::general: return "general";
    }
    return "?";
}

} // namespace eqstop
