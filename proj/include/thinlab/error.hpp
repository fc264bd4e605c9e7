#pragma once

#include <stdexcept>
#include <string>

namespace thinlab {

/// Invalid user-supplied parameters (bin count, strategy string, flags).
class config_error : public std::invalid_argument {
 public:
  explicit config_error(const std::string& what) : std::invalid_argument(what) {}
};

/// Argument outside the domain where a formula is defined.
class domain_error : public std::domain_error {
 public:
  explicit domain_error(const std::string& what) : std::domain_error(what) {}
};

/// Request refused because the work or memory it needs exceeds a guard rail.
class size_guard_error : public std::length_error {
 public:
  explicit size_guard_error(const std::string& what) : std::length_error(what) {}
};

}  // namespace thinlab
