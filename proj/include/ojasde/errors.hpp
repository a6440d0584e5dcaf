#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ojasde {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// -- linear algebra / tensor errors ------------------------------------------

struct NonSquare : Error {
  using Error::Error;
};
struct ExcessiveAsymmetry : Error {
  using Error::Error;
};
struct DimMismatch : Error {
  using Error::Error;
};
struct NotPSD : Error {
  using Error::Error;
};
struct SingularState : Error {
  using Error::Error;
};
struct NonFiniteEvaluation : Error {
  using Error::Error;
};
struct NonFiniteState : Error {
  using Error::Error;
};

// -- model construction errors ------------------------------------------------

struct NonZeroMean : Error {
  using Error::Error;
};
struct UnboundedSupport : Error {
  using Error::Error;
};
struct ColumnsNotOrthonormal : Error {
  using Error::Error;
};
struct NotOnManifold : Error {
  using Error::Error;
};
struct WrongDimension : Error {
  using Error::Error;
};
struct UnknownPotential : Error {
  using Error::Error;
};
struct UnknownTestFunction : Error {
  using Error::Error;
};
struct NegativeEta : Error {
  using Error::Error;
};

// -- dynamics / solver errors --------------------------------------------------

/// Learning rate above the admissible stability threshold; carries the step
/// at which the Frobenius-norm bound was first exceeded.
struct StabilityViolation : Error {
  std::size_t step;
  StabilityViolation(const std::string& msg, std::size_t step_)
      : Error(msg), step(step_) {}
};

struct NoiseDegenerate : Error {
  using Error::Error;
};
struct NotPeriodic : Error {
  using Error::Error;
};
struct CflViolation : Error {
  using Error::Error;
};
struct ZeroDensityCell : Error {
  using Error::Error;
};
struct InsufficientData : Error {
  using Error::Error;
};

// -- harness errors ------------------------------------------------------------

struct ParseError : Error {
  using Error::Error;
};

/// Invalid configuration value; message names the offending key path.
struct ValidationError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

}  // namespace ojasde
