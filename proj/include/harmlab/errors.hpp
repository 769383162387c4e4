#pragma once

#include <stdexcept>
#include <string>

namespace harmlab {

/// Caller error: invalid arguments, mixed presentations, bad configuration.
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A budget was exhausted (radius cap, support blow-up, memory).
struct ResourceError : std::runtime_error {
    explicit ResourceError(const std::string& what, int completed = -1)
        : std::runtime_error(what), completed_radius(completed) {}
    int completed_radius;
};

/// A numeric precondition failed (e.g. non-harmonic input to a check).
struct PreconditionError : std::runtime_error {
    explicit PreconditionError(const std::string& what, double measured = 0.0)
        : std::runtime_error(what), measured_value(measured) {}
    double measured_value;
};

} // namespace harmlab
