#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace frameloc {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Gram-Schmidt hit a vanishing intermediate vector.
class DegenerateInput : public Error {
 public:
  DegenerateInput(std::size_t column, const std::string& what)
      : Error(what), column_(column) {}

  /// Zero-based index of the column whose orthogonal residual vanished.
  [[nodiscard]] std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

// The zero eigenvalue of a Laplacian is not simple.
class MultiplicityError : public Error {
 public:
  using Error::Error;
};

class ConnectivityError : public Error {
 public:
  using Error::Error;
};

// A measurement set does not match the neighbor sets of the topology.
class InconsistentMeasurement : public Error {
 public:
  using Error::Error;
};

// A scenario violates a structural requirement of the chosen law
// (spanning tree, connected undirected graph).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Scenario file could not be parsed. line/column are 1-based, 0 if unknown.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error(what), line_(line), column_(column) {}
  [[nodiscard]] std::size_t line() const noexcept { return line_; }
  [[nodiscard]] std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Scenario parsed but a field violates an invariant; field() names it.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace frameloc
