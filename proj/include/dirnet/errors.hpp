#pragma once

#include <stdexcept>
#include <string>

namespace dirnet {

// Argument outside the region where a formula or special function is defined.
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Zero distance with zero path-loss offset.
class singular_input_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Adaptive quadrature ran out of refinements before meeting its tolerance.
class non_convergence_error : public std::runtime_error {
 public:
  non_convergence_error(const std::string& what, double value, double error_estimate)
      : std::runtime_error(what), value_(value), error_estimate_(error_estimate) {}

  double value() const noexcept { return value_; }
  double error_estimate() const noexcept { return error_estimate_; }

 private:
  double value_;
  double error_estimate_;
};

// A parameter violates its constraint; field() names the offending parameter.
class validation_error : public std::invalid_argument {
 public:
  validation_error(std::string field, const std::string& message, int line = 0)
      : std::invalid_argument(message), field_(std::move(field)), line_(line) {}

  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }  // 0 when not tied to a config file

 private:
  std::string field_;
  int line_;
};

class parse_error : public std::runtime_error {
 public:
  parse_error(int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Reading or writing a file failed.
class io_error : public std::runtime_error {
 public:
  io_error(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace dirnet
