#pragma once

#include <stdexcept>
#include <string>

namespace omsq {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration; CLI exit code 2.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Estimator or solver failure; CLI exit code 3.
class NumericalError : public Error {
public:
  using Error::Error;
};

// Physics regime the synthesizers refuse: parametric instability (s >= 1)
// or quantum squeezing (s > 2 n_bar, negative component weight).
class RegimeError : public Error {
public:
  using Error::Error;
};

enum class ErrorKind { config, numerical, regime };

// A module error re-thrown by the pipeline with the failing stage attached.
class StageError : public Error {
public:
  StageError(std::string stage, ErrorKind kind, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)), kind_(kind) {}

  const std::string& stage() const { return stage_; }
  ErrorKind kind() const { return kind_; }

private:
  std::string stage_;
  ErrorKind kind_;
};

} // namespace omsq
