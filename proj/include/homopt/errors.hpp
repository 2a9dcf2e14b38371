#pragma once

#include <stdexcept>
#include <string>

namespace homopt {

/// Base class for all numeric/runtime failures raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Integration failures.
struct StepLimitExceeded : Error {
  using Error::Error;
};
struct NonFiniteState : Error {
  using Error::Error;
};
struct OutOfRange : Error {
  using Error::Error;
};

// Root finding / Kepler solver failures.
struct NoConvergence : Error {
  using Error::Error;
};
struct MaxIterations : Error {
  using Error::Error;
};
struct SingularJacobian : Error {
  using Error::Error;
};
struct NonFiniteResidual : Error {
  using Error::Error;
};

// PMP control-law degeneracies.
struct DegenerateCostate : Error {
  using Error::Error;
};
struct DegenerateGeometry : Error {
  using Error::Error;
};
struct DegenerateReference : Error {
  using Error::Error;
};

// Continuation failures.
struct Stalled : Error {
  using Error::Error;
};

// Dataset / persistence failures.
struct IOFailure : Error {
  using Error::Error;
};
struct SchemaMismatch : Error {
  using Error::Error;
};
struct EmptySplit : Error {
  using Error::Error;
};

}  // namespace homopt
