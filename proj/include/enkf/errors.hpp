#pragma once

#include <stdexcept>
#include <string>

namespace enkf {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A covariance input is not symmetric positive (semi-)definite, or its
// factorization failed.
struct InvalidCovarianceError : Error {
  using Error::Error;
};

// Two grid densities that must share a grid do not.
struct IncompatibleGridsError : Error {
  using Error::Error;
};

// A grid operation lost too much probability mass off the grid boundary.
struct CoverageError : Error {
  using Error::Error;
};

// The observation likelihood vanished over the whole grid support.
struct LikelihoodUnderflowError : Error {
  using Error::Error;
};

// An innovation matrix stayed singular after the full jitter escalation.
struct SingularInnovationError : Error {
  using Error::Error;
};

// All particle-filter weights underflowed to zero.
struct DegenerateWeightsError : Error {
  using Error::Error;
};

// Operation restricted to d = K = 1 tensor grids was called with more.
struct UnsupportedDimensionError : Error {
  using Error::Error;
};

// Not enough data points for a fit or a report.
struct InsufficientDataError : Error {
  using Error::Error;
};

// Bad configuration file, unknown key, or missing reference for a sweep.
struct ConfigError : Error {
  using Error::Error;
};

// Scalar argument outside its documented domain.
struct DomainError : Error {
  using Error::Error;
};

// Filesystem failure, reported with the offending path.
struct IoError : Error {
  using Error::Error;
};

}  // namespace enkf
