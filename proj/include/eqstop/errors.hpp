#pragma once

#include <stdexcept>
#include <string>

namespace eqstop {

/// Bad argument values (gamma <= 0, q outside (0,1), malformed literals, ...).
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Operation refused because the inputs exceed a stated capability
/// (derivative order beyond what g guarantees, enumeration bounds, ...).
struct CapabilityError : std::domain_error {
    using std::domain_error::domain_error;
};

/// A documented precondition does not hold (input is not an equilibrium,
/// model fails validation, ...).
struct PreconditionError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Numerical failure: singular system, ill-posed query, internal identity
/// violated. For valid inputs these indicate a bug, not a user error.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace eqstop
