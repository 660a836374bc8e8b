#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "screekit/error.hpp"

namespace screekit {

/// Runs one CLI invocation in-process. `args` excludes the program name.
/// Returns the process exit code: 0 ok, 1 usage, 2 parse or missing input,
/// 3 numeric.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int exit_code(ErrorKind kind);

/// Environment variable naming a directory with default model.json and
/// classifier.json.
inline constexpr const char* kConfigDirVariable = "SCREEKIT_CONFIG_DIR";

}  // namespace screekit
