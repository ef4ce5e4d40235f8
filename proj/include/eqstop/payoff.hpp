#pragma once

#include "eqstop/chain.hpp"

#include <string>
#include <vector>

namespace eqstop {

enum class GFamily { zero, affine, mean_variance, neg_square, shifted_positive_part, piecewise_polynomial };
enum class GShape { affine, convex, strictly_convex, concave, general };

/// Declarative description of the outer nonlinearity g. Restricting g to
/// named families keeps the file format expressive enough for the worked
/// problems while letting best-response computation exploit shape exactly;
/// piecewise polynomials with shape `general` are the escape hatch.
struct GDescriptor {
    GFamily family = GFamily::zero;
    GShape shape = GShape::affine;
    int differentiability = 2; // guaranteed derivative orders: 0, 1 or 2

    double slope = 0.0, intercept = 0.0; // affine: g(y) = slope*y + intercept
    double gamma = 0.0;                  // mean_variance: g(y) = y + gamma*y^2
    double shift = 0.0;                  // shifted_positive_part: g(y) = max(y - shift, 0)
    std::vector<double> breakpoints;     // piecewise: strictly increasing
    std::vector<std::vector<double>> coefficients; // per piece, ascending powers
};

GDescriptor g_zero();
GDescriptor g_affine(double slope, double intercept);
GDescriptor g_mean_variance(double gamma);
GDescriptor g_neg_square();
GDescriptor g_shifted_positive_part(double shift);
GDescriptor g_piecewise(std::vector<double> breakpoints, std::vector<std::vector<double>> coefficients,
                        GShape shape, int differentiability = 0);

double g_eval(const GDescriptor& g, double y);
/// First/second derivative. At piecewise breakpoints the right-hand piece is
/// used. Throws CapabilityError beyond the declared differentiability.
double g_prime(const GDescriptor& g, double y);
double g_second(const GDescriptor& g, double y);

/// Checks the declared shape on [lo, hi]: symbolically for the built-in
/// families, by a 10^4-point second-difference sweep for piecewise ones.
/// Returns an empty string when the declaration holds.
std::string verify_shape(const GDescriptor& g, double lo, double hi);

struct PayoffSpec {
    std::vector<double> f; // terminal reward
    std::vector<double> h; // inner reward
    GDescriptor g;
};

/// Validates lengths, the cemetery zero-reward constraint and the declared
/// shape of g on the attainable interval [min h, max h].
PayoffSpec make_payoff(const MarkovModel& model, std::vector<double> f, std::vector<double> h, GDescriptor g);

/// f = -gamma*x^2, h = x, g(y) = y + gamma*y^2; satisfies f + g(h) = x.
PayoffSpec make_mean_variance(const MarkovModel& model, double gamma);

/// f = x^2, h = x, g(y) = -y^2; satisfies f + g(h) = 0.
PayoffSpec make_variance(const MarkovModel& model);

const char* to_string(GFamily family);
const char* to_string(GShape shape);

} // namespace eqstop
