#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trafficmon {

// Base of every error thrown by the engine. Subclasses name the failure
// category so callers (and the CLI exit-code mapping) can tell input
// problems apart from internal ones.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidGeometryError : public Error {
 public:
  using Error::Error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class SequencingError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  explicit UndefinedMetricError(std::string metric)
      : Error("undefined metric: " + metric), metric_(std::move(metric)) {}

  const std::string& metric() const { return metric_; }

 private:
  std::string metric_;
};

class DuplicateIdError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace trafficmon
