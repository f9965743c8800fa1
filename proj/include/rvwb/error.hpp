#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace rvwb {

enum class ErrorCode {
  UnknownMnemonic,
  UnknownRegister,
  ImmediateOutOfRange,
  InvalidOperandForFormat,
  IllegalInstruction,
  UnknownDirective,
  MalformedOperand,
  DuplicateLabel,
  UndefinedLabel,
  BranchOutOfRange,
  AssemblyHasErrors,
  MisalignedAccess,
  NotAnInstructionAddress,
  NoProgramLoaded,
  InvalidConfig,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library. `line` is set when the error can be
/// attributed to a source line (combined kernel+user numbering).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<int> line = std::nullopt)
      : std::runtime_error(message), code_(code), line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<int> line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::optional<int> line_;
};

}  // namespace rvwb
