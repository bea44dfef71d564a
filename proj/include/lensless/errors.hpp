#pragma once

#include <stdexcept>
#include <string>

namespace lensless {

// Shape or length disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A sensor's view window falls outside the scene extent.
class ExtentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file or config contents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Measurement sets that cannot be reconstructed together.
class MismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lensless
