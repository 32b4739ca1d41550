#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace domaug {

// Invalid arguments, configs, or preconditions. Maps to CLI exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable or malformed input data. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model gateway failure. `transient()` marks errors worth retrying
// (timeouts, 429, 5xx). Maps to CLI exit code 3.
class GatewayError : public std::runtime_error {
 public:
  GatewayError(const std::string& what, bool transient)
      : std::runtime_error(what), transient_(transient) {}

  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

}  // namespace domaug
