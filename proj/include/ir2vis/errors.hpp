#ifndef IR2VIS_ERRORS_HPP
#define IR2VIS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ir2vis {

/// Base class for all library errors. Each subclass maps to a stable
/// category name and a distinct CLI exit code.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
  virtual const char* category() const { return "error"; }
  virtual int exit_code() const { return 1; }
};

/// Shape or axis mismatch between tensors; message names the offending axes.
class DimensionError : public Error {
public:
  using Error::Error;
  const char* category() const override { return "dimension"; }
  int exit_code() const override { return 4; }
};

/// Backward invoked without a recorded forward graph.
class TapeError : public Error {
public:
  using Error::Error;
  const char* category() const override { return "tape"; }
  int exit_code() const override { return 4; }
};

/// API precondition violated (e.g. non-scalar loss passed to backward).
class ContractError : public Error {
public:
  using Error::Error;
  const char* category() const override { return "contract"; }
  int exit_code() const override { return 4; }
};

/// Optimizer failure; carries the name of the offending parameter.
class OptimizerError : public Error {
public:
  OptimizerError(const std::string& param, const std::string& msg)
      : Error("parameter '" + param + "': " + msg), param_name(param) {}
  const char* category() const override { return "optimizer"; }
  int exit_code() const override { return 6; }
  std::string param_name;
};

class IoError : public Error {
public:
  using Error::Error;
  const char* category() const override { return "io"; }
  int exit_code() const override { return 3; }
};

class ValidationError : public Error {
public:
  using Error::Error;
  const char* category() const override { return "validation"; }
  int exit_code() const override { return 4; }
};

class ConfigError : public Error {
public:
  using Error::Error;
  const char* category() const override { return "config"; }
  int exit_code() const override { return 4; }
};

/// A metric or loss whose value is undefined (e.g. every window masked).
class DegenerateError : public Error {
public:
  using Error::Error;
  const char* category() const override { return "degenerate"; }
  int exit_code() const override { return 6; }
};

/// Checkpoint and model spec do not match.
class CheckpointError : public Error {
public:
  using Error::Error;
  const char* category() const override { return "checkpoint"; }
  int exit_code() const override { return 5; }
};

/// Training aborted by the divergence guard.
class DivergenceError : public Error {
public:
  using Error::Error;
  const char* category() const override { return "divergence"; }
  int exit_code() const override { return 6; }
};

}  // namespace ir2vis

#endif  // IR2VIS_ERRORS_HPP
