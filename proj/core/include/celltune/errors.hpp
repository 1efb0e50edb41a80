#pragma once

#include <stdexcept>
#include <string>

namespace celltune {

// Invalid configuration or inputs; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace celltune
