#pragma once

#include <stdexcept>
#include <string>

namespace covplan {

// Caller broke a documented precondition (mismatched lengths, bad ranges).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed or non-finite input data (files, NaN cells, schema violations).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An observation fell farther than epsilon from every base trajectory;
// signals a corpus/basis mismatch.
class CoverageError : public DataError {
 public:
  using DataError::DataError;
};

// Training diverged (non-finite loss).
class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A calibration target is unattainable at the given set size.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace covplan
