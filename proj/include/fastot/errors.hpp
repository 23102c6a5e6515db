#pragma once

#include <stdexcept>
#include <string>

namespace fastot {

// Malformed or inconsistent arguments (shapes, masses, file contents).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// A size limit was hit: the dense cap of the exact solver, or the support
// enlargement budget of the dual solver.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SupportEmpty : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Diverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fastot
