#pragma once

#include <stdexcept>
#include <string>

namespace pflm {

// Base for all library errors. Subclasses exist so callers can map
// failure classes to exit codes without string matching.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Precondition violation (bad argument value, dimension mismatch).
struct InvalidArgument : Error {
  using Error::Error;
};

// Two GridFunctions or operators built over different grids.
struct GridMismatch : Error {
  using Error::Error;
};

// Unpenalized solve requested but the combined design is rank deficient.
struct RankDeficiency : Error {
  using Error::Error;
};

// Empirical covariate Gram matrix not invertible.
struct SingularDesign : Error {
  using Error::Error;
};

// Operator has fewer retained eigenpairs than an operation needs.
struct InsufficientSpectrum : Error {
  using Error::Error;
};

// Packing search hit its retry cap before reaching the target size.
struct PackingFailure : Error {
  using Error::Error;
};

// Experiment configuration unreadable or semantically invalid.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace pflm
