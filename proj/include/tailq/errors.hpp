#pragma once

#include <stdexcept>
#include <string>

namespace tailq {

// Base class so callers can catch anything thrown by this library in one place.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad distribution text form or malformed config value.
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid parameters that violate a documented precondition,
// e.g. a Pareto shape <= 1 (infinite mean) or feedback_p outside [0,1).
struct DomainError : Error {
    using Error::Error;
};

// rho >= 1: steady-state quantities do not exist, simulation would not terminate.
struct InstabilityError : Error {
    InstabilityError(double rho_, const std::string& what_) : Error(what_), rho(rho_) {}
    double rho;
};

// A single replication exceeded the event cap. Runs count these; they are
// never silently truncated into the sample.
struct EventBudgetExceeded : Error {
    using Error::Error;
};

// simulate_tagged_forced: the requested service slot does not exist in the
// realized trace (fewer waiting customers than the forced position).
struct ForcedIndexUnreachable : Error {
    using Error::Error;
};

// Asymptote requested for a law with no regular-variation exponent.
struct RVRequired : Error {
    using Error::Error;
};

// Estimator input problems, named individually so tests can assert on them.
struct EmptyGrid : Error {
    using Error::Error;
};
struct EmptySample : Error {
    using Error::Error;
};
struct ZeroPrediction : Error {
    using Error::Error;
};
struct MissingAttribution : Error {
    using Error::Error;
};
struct TraceTooLean : Error {
    using Error::Error;
};

}  // namespace tailq
