#pragma once

// RV32I + M-multiply instruction tables, bit-exact encode/decode and the
// per-format field breakdown shown by the debugger.

#include <array>
#include <compare>
#include <functional>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rvwb/error.hpp"

namespace rvwb {

using Word = std::uint32_t;

class RegisterIndex {
 public:
  constexpr RegisterIndex() = default;
  /// Throws Error(UnknownRegister) when index > 31.
  constexpr explicit RegisterIndex(unsigned index) : index_(static_cast<std::uint8_t>(index)) {
    if (index > 31) throw Error(ErrorCode::UnknownRegister, "register index out of range: x" + std::to_string(index));
  }

  constexpr unsigned value() const noexcept { return index_; }
  constexpr bool is_zero() const noexcept { return index_ == 0; }

  friend constexpr auto operator<=>(RegisterIndex, RegisterIndex) = default;

 private:
  std::uint8_t index_ = 0;
};

enum class Format : std::uint8_t { R, I, S, B, U, J };

char format_letter(Format format);

enum class Mnemonic : std::uint8_t {
  LUI, AUIPC, JAL, JALR,
  BEQ, BNE, BLT, BGE, BLTU, BGEU,
  LB, LH, LW, LBU, LHU,
  SB, SH, SW,
  ADDI, SLTI, SLTIU, XORI, ORI, ANDI,
  SLLI, SRLI, SRAI,
  ADD, SUB, SLL, SLT, SLTU, XOR, SRL, SRA, OR, AND,
  ECALL, EBREAK, FENCE,
  MUL, MULH, MULHSU, MULHU,
};

struct OpSpec {
  Mnemonic id;
  std::string_view mnemonic;
  Format format;
  std::uint8_t opcode;
  std::optional<std::uint8_t> funct3;
  std::optional<std::uint8_t> funct7;
  // ECALL/EBREAK share opcode and funct3 and differ only in imm[11:0].
  std::optional<std::uint16_t> fixed_imm;

  bool is_shift_immediate() const noexcept {
    return format == Format::I && funct7.has_value();
  }
};

/// All implemented instructions, in table order.
std::span<const OpSpec> opspecs();

/// Case-insensitive. Throws Error(UnknownMnemonic).
const OpSpec& lookup_opspec(std::string_view mnemonic);
const OpSpec& opspec(Mnemonic id);
std::optional<std::reference_wrapper<const OpSpec>> find_opspec(std::string_view mnemonic);

std::string_view mnemonic_name(Mnemonic id);

/// Operands independent of bit layout. Which fields are present depends on
/// the format: R has rd/rs1/rs2, I has rd/rs1/imm, S and B have rs1/rs2/imm,
/// U and J have rd/imm. U immediates hold the already-shifted upper value.
struct DecodedInstruction {
  Mnemonic op = Mnemonic::ADDI;
  std::optional<RegisterIndex> rd;
  std::optional<RegisterIndex> rs1;
  std::optional<RegisterIndex> rs2;
  std::optional<std::int32_t> imm;

  std::string_view mnemonic() const { return mnemonic_name(op); }
  const OpSpec& spec() const { return opspec(op); }

  friend bool operator==(const DecodedInstruction&, const DecodedInstruction&) = default;
};

/// Throws Error(ImmediateOutOfRange) or Error(InvalidOperandForFormat).
Word encode(const DecodedInstruction& instr);

/// Throws Error(IllegalInstruction) for words matching no implemented OpSpec.
DecodedInstruction decode(Word word);

std::optional<DecodedInstruction> try_decode(Word word) noexcept;

struct FieldSegment {
  int hi_bit;
  int lo_bit;
  std::string field_name;
  std::string bits;

  friend bool operator==(const FieldSegment&, const FieldSegment&) = default;
};

using FieldBreakdown = std::vector<FieldSegment>;

/// Segments tile bits 31..0 in descending order. Throws Error(IllegalInstruction).
FieldBreakdown breakdown(Word word);

/// Two's-complement sign extension from `bits` (1..31) to 32 bits.
std::int32_t sign_extend(std::uint32_t value, int bits);

/// Accepts x0..x31 and ABI names, case-insensitive.
RegisterIndex register_name_to_index(std::string_view name);
std::optional<RegisterIndex> parse_register(std::string_view name) noexcept;
std::string_view abi_name(RegisterIndex reg);

/// Inclusive immediate bounds accepted by encode() for the instruction.
struct ImmediateRange {
  std::int64_t min;
  std::int64_t max;
  std::int64_t step;  // required alignment (2 for B/J, 4096 for U)
};
ImmediateRange immediate_range(const OpSpec& spec);

/// Textual disassembly using x-register names, e.g. "lw x5, 8(x2)".
std::string disassemble(const DecodedInstruction& instr);

}  // namespace rvwb
