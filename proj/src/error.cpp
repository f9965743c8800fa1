#include "rvwb/error.hpp"

namespace rvwb {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownMnemonic: return "UnknownMnemonic";
    case ErrorCode::UnknownRegister: return "UnknownRegister";
    case ErrorCode::ImmediateOutOfRange: return "ImmediateOutOfRange";
    case ErrorCode::InvalidOperandForFormat: return "InvalidOperandForFormat";
    case ErrorCode::IllegalInstruction: return "IllegalInstruction";
    case ErrorCode::UnknownDirective: return "UnknownDirective";
    case ErrorCode::MalformedOperand: return "MalformedOperand";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::UndefinedLabel: return "UndefinedLabel";
    case ErrorCode::BranchOutOfRange: return "BranchOutOfRange";
    case ErrorCode::AssemblyHasErrors: return "AssemblyHasErrors";
    case ErrorCode::MisalignedAccess: return "MisalignedAccess";
    case ErrorCode::NotAnInstructionAddress: return "NotAnInstructionAddress";
    case ErrorCode::NoProgramLoaded: return "NoProgramLoaded";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace rvwb
