#ifndef NLF_ERRORS_HPP
#define NLF_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace nlf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter outside the domain where a formula or solver is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver or integrator gave up; `residual` is the last value seen.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, double residual = 0.0)
      : Error(what), residual(residual) {}
  double residual;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

/// More sign changes than a well-posed root query allows.  All roots found
/// are carried along so callers can inspect them.
class AmbiguityError : public Error {
 public:
  AmbiguityError(const std::string& what, std::vector<double> roots)
      : Error(what), roots(std::move(roots)) {}
  std::vector<double> roots;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field(field) {}
  std::string field;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlf

#endif  // NLF_ERRORS_HPP
