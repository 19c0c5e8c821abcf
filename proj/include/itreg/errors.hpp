#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace itreg {

// Bad arguments: dimension mismatch, out-of-range parameter, malformed config.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation is defined only for affine-manifold regularizers (L1, L12, TV1D).
class UnsupportedKind : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : std::runtime_error(what), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class ConvergenceFailure : public std::runtime_error {
 public:
  ConvergenceFailure(double last_residual, const std::string& what)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotApplicable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace itreg
