#pragma once

#include <stdexcept>
#include <string>

namespace screekit {

/// Broad failure category. The CLI maps each kind onto its exit code.
enum class ErrorKind {
  usage,    // bad arguments or preconditions the caller controls
  parse,    // unreadable, missing or malformed input
  numeric,  // input is well formed but the quantity is undefined
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Malformed input with a location. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, std::string field, const std::string& message);

  [[nodiscard]] const std::string& source() const noexcept { return source_; }
  [[nodiscard]] std::size_t line() const noexcept { return line_; }
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string source_;
  std::size_t line_;
  std::string field_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace screekit
