#pragma once

#include <stdexcept>
#include <string>

namespace auheat {

// Bad inputs: malformed files, schema violations, invalid configs.
// Mapped to exit code 1 by the CLI.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures at run time: I/O problems, diverged training, internal errors.
// Mapped to exit code 2 by the CLI.
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace auheat
