#pragma once

#include <stdexcept>
#include <string>

namespace qfl {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad argument values: indices out of range, shape mismatches, invalid math.
struct DomainError : Error {
    using Error::Error;
};

// A register would exceed the simulator qubit cap.
struct CapacityError : Error {
    using Error::Error;
};

// A numerical invariant that should be impossible to break was broken.
struct InvariantError : Error {
    using Error::Error;
};

// Protocol-level verification found evidence of tampering.
struct TamperDetected : Error {
    using Error::Error;
};

// A protocol run cannot continue (residual entanglement, failed checks).
struct ProtocolAbort : Error {
    using Error::Error;
};

// Gradient inversion is not feasible for the given gradients.
struct InversionInfeasible : Error {
    using Error::Error;
};

// Inconsistent or unusable experiment configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace qfl
