#pragma once

#include <stdexcept>
#include <string>

namespace recollide {

// Base for all library errors. Subtypes exist so callers (and tests) can
// distinguish contract violations from estimator-level failures.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// geometry
struct ZeroVectorError : Error { using Error::Error; };
struct InsideSphereError : Error { using Error::Error; };
struct NonIncomingError : Error { using Error::Error; };

// two-scatterer events
struct DegenerateEventError : Error { using Error::Error; };
struct MechanicallyInconsistentError : Error { using Error::Error; };
struct CollinearFrameError : Error { using Error::Error; };
struct PreconditionError : Error { using Error::Error; };

// sampling
struct ParallelVectorsError : Error { using Error::Error; };
struct BadRangeError : Error { using Error::Error; };
struct BadAngleError : Error { using Error::Error; };

// estimators
struct InsufficientHitsError : Error { using Error::Error; };
struct TooFewPointsError : Error { using Error::Error; };
struct NonPositiveMassError : Error { using Error::Error; };

// lorentz gas
struct CapsuleInconsistencyError : Error { using Error::Error; };

// cli / configuration
struct ConfigError : Error { using Error::Error; };

}  // namespace recollide
