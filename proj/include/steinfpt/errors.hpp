#pragma once

#include <stdexcept>
#include <string>

namespace steinfpt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A NetworkSpec (or the config it was read from) violates an invariant.
/// component()/cluster() give the zero-based offender, or -1.
class SpecError : public Error {
 public:
  explicit SpecError(const std::string& what, int component = -1,
                     int cluster = -1)
      : Error(what), component_(component), cluster_(cluster) {}

  int component() const noexcept { return component_; }
  int cluster() const noexcept { return cluster_; }

 private:
  int component_;
  int cluster_;
};

/// Config parse/validation failure anchored to a line of the source file.
class ConfigError : public SpecError {
 public:
  ConfigError(std::string file, int line, const std::string& what)
      : SpecError(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  int line() const noexcept { return line_; }

 private:
  std::string file_;
  int line_;
};

class NegativeRate : public Error {
 public:
  NegativeRate(int n, const std::string& what)
      : Error("negative Poisson rate at n=" + std::to_string(n) + ": " + what),
        n_(n) {}
  int n() const noexcept { return n_; }

 private:
  int n_;
};

class NotPSD : public Error {
 public:
  using Error::Error;
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class EventBudgetExceeded : public Error {
 public:
  using Error::Error;
};

class StopTooSmall : public Error {
 public:
  using Error::Error;
};

class NonPositiveDiagonal : public Error {
 public:
  using Error::Error;
};

class EmptySample : public Error {
 public:
  using Error::Error;
};

class InsufficientReplications : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized path/train file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace steinfpt
