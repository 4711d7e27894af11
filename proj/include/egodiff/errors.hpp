#pragma once

#include <stdexcept>
#include <string>

namespace egodiff {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An operation was called with inputs that violate its contract.
struct ContractError : Error {
  using Error::Error;
};

// Normalized energy of an all-zero feature matrix (0/0 is left undefined).
struct NormalizationError : Error {
  using Error::Error;
};

// Malformed or inconsistent external data (bundles, checkpoints, configs).
struct DataError : Error {
  using Error::Error;
};

// Non-finite values produced during numerics (diverged solver, bad loss).
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace egodiff
