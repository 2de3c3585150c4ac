#pragma once

#include <stdexcept>
#include <string>

namespace mamo {

// Error taxonomy. The CLI maps these onto exit codes:
//   ConfigError -> 2, DataError -> 3, DivergenceError -> 4.
// ShapeError / ContractError / OracleError indicate broken caller
// contracts and surface as generic failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension mismatch between operands; message names both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// A precondition on caller-supplied state was violated (stale cache,
// inconsistent slot shapes, empty input where nonempty is required).
struct ContractError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

// Non-finite value encountered during training or adaptation.
struct DivergenceError : Error {
  using Error::Error;
};

// The finite-difference oracle hit a non-finite loss at a probe point.
struct OracleError : Error {
  using Error::Error;
};

}  // namespace mamo
