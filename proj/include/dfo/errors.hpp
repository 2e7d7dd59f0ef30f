#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dfo {

/// Failure categories. The numeric values double as CLI exit codes and as
/// the C API status codes in dfo.h, so they must stay in sync.
enum class ErrorKind : int {
  Usage = 1,
  Config = 2,
  Fit = 3,
  Integration = 4,
  Io = 5,
  Input = 6,
  Numerical = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Bad arguments: dimension mismatches, non-finite inputs, out-of-range knobs.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

/// A non-finite value appeared while evaluating a model or PDE operator.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::ptrdiff_t point_index)
      : Error(ErrorKind::Numerical, what + " (point " + std::to_string(point_index) + ")"),
        point_index_(point_index) {}
  std::ptrdiff_t point_index() const noexcept { return point_index_; }

 private:
  std::ptrdiff_t point_index_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class FitError : public Error {
 public:
  FitError(const std::string& what, std::size_t iteration)
      : Error(ErrorKind::Fit, what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, std::size_t step)
      : Error(ErrorKind::Integration, what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace dfo
