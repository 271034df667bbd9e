#pragma once

#include <stdexcept>
#include <string>

namespace lfp {

// Invalid input or configuration (CLI exit code 1).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A numerical gate tripped during a computation (CLI exit code 2).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BoundaryMassError : NumericalError {
    double fraction;
    double time;
    BoundaryMassError(const std::string& what, double fraction_, double time_)
        : NumericalError(what), fraction(fraction_), time(time_) {}
};

struct FlowEscapeError : NumericalError {
    using NumericalError::NumericalError;
};

struct UnsupportedError : ConfigError {
    using ConfigError::ConfigError;
};

} // namespace lfp
