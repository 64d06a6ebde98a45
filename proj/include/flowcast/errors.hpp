#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flowcast {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoData : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct IndexError : Error {
    using Error::Error;
};
struct NonFiniteInput : Error {
    using Error::Error;
};
struct TimeDomainError : Error {
    using Error::Error;
};
struct UnsupportedFamily : Error {
    using Error::Error;
};
struct RangeError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DivergedTrajectory : Error {
    using Error::Error;
};
struct InsufficientScaling : Error {
    using Error::Error;
};

// Fatal per-sample integration failure. Carries the step at which the state
// became non-finite and |g(t)| at that step as a stiffness hint.
struct NumericalBlowup : Error {
    NumericalBlowup(std::size_t step_index, double g_abs, const std::string& what)
        : Error(what), step(step_index), g_magnitude(g_abs) {}
    std::size_t step;
    double g_magnitude;
};

}  // namespace flowcast
