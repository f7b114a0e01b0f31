#pragma once

#include <stdexcept>
#include <string>

namespace texcov {

/// Coarse failure category; the CLI maps it onto process exit codes.
enum class ErrorKind {
  Argument,
  Io,
  Format,
  Config,
  Numeric,
  NotPositiveDefinite,
  Convergence,
  DegenerateData,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error(ErrorKind::Argument, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::Format, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

class NotPositiveDefiniteError : public Error {
 public:
  explicit NotPositiveDefiniteError(const std::string& what)
      : Error(ErrorKind::NotPositiveDefinite, what) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(ErrorKind::Convergence, what), residual_(residual) {}
  /// Last residual reached before giving up.
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class DegenerateDataError : public Error {
 public:
  explicit DegenerateDataError(const std::string& what) : Error(ErrorKind::DegenerateData, what) {}
};

}  // namespace texcov
