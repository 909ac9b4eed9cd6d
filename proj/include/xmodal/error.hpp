#pragma once

#include <stdexcept>
#include <string>

namespace xmodal {

// File missing, unreadable, or malformed content. CLI maps this to exit 2.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration (unknown keys, missing required inputs). CLI exit 2.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Mathematical domain violations (std::domain_error) map to CLI exit 3.

}  // namespace xmodal
