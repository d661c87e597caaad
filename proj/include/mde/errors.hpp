#pragma once

#include <stdexcept>
#include <string>

namespace mde {

// Exit-code mapping used by the CLI: validation 2, numerical 3, resource 4.
struct validation_error : std::runtime_error {
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct numerical_error : std::runtime_error {
  explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct resource_limit_error : std::runtime_error {
  explicit resource_limit_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct parse_error : validation_error {
  explicit parse_error(const std::string& msg) : validation_error(msg) {}
};

struct structural_error : std::logic_error {
  explicit structural_error(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace mde
