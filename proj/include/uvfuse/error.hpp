#pragma once

#include <stdexcept>
#include <string>

namespace uvfuse {

enum class ErrorCode {
  Parse,
  MissingUv,
  DegenerateMesh,
  InvalidRadius,
  EmptyInput,
  InvalidRange,
  OutOfRange,
  ShapeMismatch,
  Transport,
  OracleUnset,
  AllInvalid,
  HolesPresent,
  Io,
};

const char* to_string(ErrorCode code);

/// Single exception type for the library; `code()` distinguishes the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace uvfuse
