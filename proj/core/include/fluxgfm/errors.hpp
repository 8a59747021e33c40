#pragma once

#include <stdexcept>
#include <string>

namespace fluxgfm {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Pole placement was requested against a (near-)zero direction vector.
struct ZeroDirection : Error {
    using Error::Error;
};

/// A pole pair was not closed under complex conjugation.
struct NonConjugatePair : Error {
    using Error::Error;
};

/// The eigenvalue iteration failed to converge within its iteration budget.
/// This signals a numerics bug, not a user error.
struct NoConvergence : Error {
    using Error::Error;
};

/// An integration step or controller update produced non-finite values.
struct NonFiniteState : Error {
    NonFiniteState(const std::string& what, double t_diverged)
        : Error(what), t(t_diverged) {}
    explicit NonFiniteState(const std::string& what) : Error(what) {}
    double t = -1.0;  ///< simulation time of divergence, -1 if not applicable
};

/// Virtual flux is undefined at (near-)zero grid frequency.
struct ZeroFrequency : Error {
    using Error::Error;
};

/// The requested power set-point exceeds the static transfer limit.
struct InfeasibleSetpoint : Error {
    using Error::Error;
};

/// The flux target vector is too small to solve the gain equations.
struct SingularFlux : Error {
    using Error::Error;
};

/// Neither Newton iteration nor the simulation fallback found an operating point.
struct NoEquilibrium : Error {
    using Error::Error;
};

/// A trace did not reach steady state within the simulated horizon.
struct NoSteadyState : Error {
    using Error::Error;
};

}  // namespace fluxgfm
