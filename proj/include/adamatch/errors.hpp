#pragma once

#include <stdexcept>
#include <string>

namespace adamatch {

// Argument errors use std::invalid_argument throughout; the types below mark
// failures callers commonly want to tell apart.

// Projective denominator vanished, or a model is rank-deficient.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Too few correspondences for a minimal solver.
class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents or mismatched dimensions on read.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace adamatch
