#pragma once

#include <stdexcept>
#include <string>

namespace vpf {

/// Failure category. The CLI maps these onto exit codes.
enum class ErrorKind {
  Domain,
  Parse,
  Schema,
  Coverage,
  Size,
  Dimension,
  Data,
  Config,
  Range,
  Alignment,
  DegenerateScale,
  State,
  UndefinedCorrelation,
  Numerical,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure carrying the 1-based line number of the offending row.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace vpf
