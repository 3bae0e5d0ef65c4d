#pragma once

#include <stdexcept>
#include <string>

namespace hmor {

// Bad input: malformed files, violated preconditions, out-of-domain queries.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Query outside the DC table box.
class DomainError : public ValidationError {
public:
  DomainError(const std::string& what, int port, double value, double bound)
      : ValidationError(what), port_(port), value_(value), bound_(bound) {}
  int port() const noexcept { return port_; }
  double value() const noexcept { return value_; }
  double bound() const noexcept { return bound_; }

private:
  int port_;
  double value_;
  double bound_;
};

// Integrator failure, singular systems, non-finite losses.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace hmor
