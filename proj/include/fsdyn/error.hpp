#pragma once

#include <stdexcept>
#include <string>

namespace fsdyn {

// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exhaustive enumeration or exact search would exceed a configured budget.
struct BudgetError : Error {
  using Error::Error;
};

// The requested operation is not representable for this space, map or measure.
struct UnsupportedError : Error {
  using Error::Error;
};

// A spanning problem has no solution on the supplied candidates.
struct InfeasibleError : Error {
  using Error::Error;
};

// Malformed input data (bad index, negative mass, wrong dimension, ...).
struct DataError : Error {
  using Error::Error;
};

// Entropy was requested for a measure that is not invariant.
struct NonInvariantError : Error {
  NonInvariantError(const std::string& what, double defect_value)
      : Error(what), defect(defect_value) {}
  double defect;
};

}  // namespace fsdyn
