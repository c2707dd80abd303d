#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wmfgp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad argument values: non-finite inputs, wrong lengths, bad bounds.
class InvalidInput : public Error {
public:
  using Error::Error;
};

/// Invalid configuration (scenario files, CLI options, infeasible bounds).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// The HF index set is not contained in the LF index set.
class DesignViolation : public Error {
public:
  using Error::Error;
};

/// A sample without spread where one is required (bandwidth, skewness).
class DegenerateSample : public Error {
public:
  using Error::Error;
};

/// Cholesky failed at every jitter level.
class NumericalFailure : public Error {
public:
  NumericalFailure(const std::string &what, std::vector<double> jitters)
      : Error(format(what, jitters)), jitters_(std::move(jitters)) {}

  const std::vector<double> &attempted_jitters() const { return jitters_; }

private:
  static std::string format(const std::string &what,
                            const std::vector<double> &jitters) {
    std::ostringstream os;
    os << what << " (jitter tried:";
    for (double j : jitters) {
      os << ' ' << j;
    }
    os << ')';
    return os.str();
  }

  std::vector<double> jitters_;
};

/// Every multi-start of an optimizer failed.
class FitFailure : public Error {
public:
  using Error::Error;
};

class ParameterPathology : public Error {
public:
  using Error::Error;
};

class UndefinedReduction : public Error {
public:
  using Error::Error;
};

class PairingError : public Error {
public:
  using Error::Error;
};

class LookupError : public Error {
public:
  using Error::Error;
};

/// Malformed CSV content; carries the 1-based data row where possible.
class ParseError : public Error {
public:
  using Error::Error;
};

class DuplicateTimestamp : public ParseError {
public:
  using ParseError::ParseError;
};

class NonMonotoneTimestamp : public ParseError {
public:
  using ParseError::ParseError;
};

} // namespace wmfgp
