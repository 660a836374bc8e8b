#include "screekit/error.hpp"

namespace screekit {

namespace {

std::string format_location(const std::string& source, std::size_t line, const std::string& field,
                            const std::string& message) {
  std::string out = source.empty() ? std::string("<input>") : source;
  if (line > 0) out += ":" + std::to_string(line);
  if (!field.empty()) out += ": field '" + field + "'";
  out += ": " + message;
  return out;
}

}  // namespace

ParseError::ParseError(std::string source, std::size_t line, std::string field, const std::string& message)
    : Error(ErrorKind::parse, format_location(source, line, field, message)),
      source_(std::move(source)),
      line_(line),
      field_(std::move(field)) {}

}  // namespace screekit
