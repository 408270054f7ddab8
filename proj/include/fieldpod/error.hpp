#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fieldpod {

enum class ErrorCode {
  Configuration,   // invalid settings or flags
  Validation,      // bad user input (unknown crop, short passphrase, ...)
  ModeViolation,   // write attempted outside ConfigMode
  NotFound,
  Range,           // out-of-range value or out-of-season date
  MissingData,     // weather gap
  Precondition,    // contract violation by the caller
  Storage,         // unrecoverable persistence failure
  Transport,       // broker unreachable / connection dropped
  Parse,           // malformed file contents
};

std::string_view to_string(ErrorCode code);

/// Base exception for the project. `field()` names the offending field or key
/// when one applies (empty otherwise).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string field = {})
      : std::runtime_error(std::move(message)), code_(code), field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

}  // namespace fieldpod
