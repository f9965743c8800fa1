#include "rvwb/isa.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fmt/format.h>

namespace rvwb {

namespace {

constexpr std::uint8_t kOpLui = 0b0110111;
constexpr std::uint8_t kOpAuipc = 0b0010111;
constexpr std::uint8_t kOpJal = 0b1101111;
constexpr std::uint8_t kOpJalr = 0b1100111;
constexpr std::uint8_t kOpBranch = 0b1100011;
constexpr std::uint8_t kOpLoad = 0b0000011;
constexpr std::uint8_t kOpStore = 0b0100011;
constexpr std::uint8_t kOpImm = 0b0010011;
constexpr std::uint8_t kOpReg = 0b0110011;
constexpr std::uint8_t kOpSystem = 0b1110011;
constexpr std::uint8_t kOpMiscMem = 0b0001111;

using M = Mnemonic;
using F = Format;
constexpr auto none = std::nullopt;

constexpr std::array<OpSpec, 44> kTable{{
    {M::LUI, "lui", F::U, kOpLui, none, none, none},
    {M::AUIPC, "auipc", F::U, kOpAuipc, none, none, none},
    {M::JAL, "jal", F::J, kOpJal, none, none, none},
    {M::JALR, "jalr", F::I, kOpJalr, 0b000, none, none},

    {M::BEQ, "beq", F::B, kOpBranch, 0b000, none, none},
    {M::BNE, "bne", F::B, kOpBranch, 0b001, none, none},
    {M::BLT, "blt", F::B, kOpBranch, 0b100, none, none},
    {M::BGE, "bge", F::B, kOpBranch, 0b101, none, none},
    {M::BLTU, "bltu", F::B, kOpBranch, 0b110, none, none},
    {M::BGEU, "bgeu", F::B, kOpBranch, 0b111, none, none},

    {M::LB, "lb", F::I, kOpLoad, 0b000, none, none},
    {M::LH, "lh", F::I, kOpLoad, 0b001, none, none},
    {M::LW, "lw", F::I, kOpLoad, 0b010, none, none},
    {M::LBU, "lbu", F::I, kOpLoad, 0b100, none, none},
    {M::LHU, "lhu", F::I, kOpLoad, 0b101, none, none},

    {M::SB, "sb", F::S, kOpStore, 0b000, none, none},
    {M::SH, "sh", F::S, kOpStore, 0b001, none, none},
    {M::SW, "sw", F::S, kOpStore, 0b010, none, none},

    {M::ADDI, "addi", F::I, kOpImm, 0b000, none, none},
    {M::SLTI, "slti", F::I, kOpImm, 0b010, none, none},
    {M::SLTIU, "sltiu", F::I, kOpImm, 0b011, none, none},
    {M::XORI, "xori", F::I, kOpImm, 0b100, none, none},
    {M::ORI, "ori", F::I, kOpImm, 0b110, none, none},
    {M::ANDI, "andi", F::I, kOpImm, 0b111, none, none},

    {M::SLLI, "slli", F::I, kOpImm, 0b001, 0b0000000, none},
    {M::SRLI, "srli", F::I, kOpImm, 0b101, 0b0000000, none},
    {M::SRAI, "srai", F::I, kOpImm, 0b101, 0b0100000, none},

    {M::ADD, "add", F::R, kOpReg, 0b000, 0b0000000, none},
    {M::SUB, "sub", F::R, kOpReg, 0b000, 0b0100000, none},
    {M::SLL, "sll", F::R, kOpReg, 0b001, 0b0000000, none},
    {M::SLT, "slt", F::R, kOpReg, 0b010, 0b0000000, none},
    {M::SLTU, "sltu", F::R, kOpReg, 0b011, 0b0000000, none},
    {M::XOR, "xor", F::R, kOpReg, 0b100, 0b0000000, none},
    {M::SRL, "srl", F::R, kOpReg, 0b101, 0b0000000, none},
    {M::SRA, "sra", F::R, kOpReg, 0b101, 0b0100000, none},
    {M::OR, "or", F::R, kOpReg, 0b110, 0b0000000, none},
    {M::AND, "and", F::R, kOpReg, 0b111, 0b0000000, none},

    {M::ECALL, "ecall", F::I, kOpSystem, 0b000, none, 0},
    {M::EBREAK, "ebreak", F::I, kOpSystem, 0b000, none, 1},
    {M::FENCE, "fence", F::I, kOpMiscMem, 0b000, none, none},

    {M::MUL, "mul", F::R, kOpReg, 0b000, 0b0000001, none},
    {M::MULH, "mulh", F::R, kOpReg, 0b001, 0b0000001, none},
    {M::MULHSU, "mulhsu", F::R, kOpReg, 0b010, 0b0000001, none},
    {M::MULHU, "mulhu", F::R, kOpReg, 0b011, 0b0000001, none},
}};

static_assert([] {
  for (std::size_t i = 0; i < kTable.size(); ++i)
    if (static_cast<std::size_t>(kTable[i].id) != i) return false;
  return true;
}(), "table order must follow the Mnemonic enum");

constexpr std::array<std::string_view, 32> kAbiNames{
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0",
    "a1",   "a2", "a3", "a4", "a5", "a6", "a7", "s2", "s3", "s4", "s5",
    "s6",   "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6"};

bool iequals(std::string_view a, std::string_view b) {
  return std::ranges::equal(a, b, [](char x, char y) {
    return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
  });
}

constexpr Word bits(Word word, int hi, int lo) {
  return (word >> lo) & ((Word{1} << (hi - lo + 1)) - 1);
}

std::string binary(Word value, int width) {
  std::string out(static_cast<std::size_t>(width), '0');
  for (int i = 0; i < width; ++i)
    if (value & (Word{1} << (width - 1 - i))) out[static_cast<std::size_t>(i)] = '1';
  return out;
}

[[noreturn]] void invalid_operands(const OpSpec& spec, std::string_view detail) {
  throw Error(ErrorCode::InvalidOperandForFormat,
              fmt::format("{} ({}-type): {}", spec.mnemonic, format_letter(spec.format), detail));
}

void require_fields(const OpSpec& spec, const DecodedInstruction& instr, bool rd, bool rs1,
                    bool rs2, bool imm) {
  auto check = [&](bool present, bool wanted, std::string_view name) {
    if (present != wanted)
      invalid_operands(spec, fmt::format("{} must be {}", name, wanted ? "present" : "absent"));
  };
  check(instr.rd.has_value(), rd, "rd");
  check(instr.rs1.has_value(), rs1, "rs1");
  check(instr.rs2.has_value(), rs2, "rs2");
  check(instr.imm.has_value(), imm, "imm");
}

Word reg(const std::optional<RegisterIndex>& r) { return r ? r->value() : 0; }

}  // namespace

char format_letter(Format format) {
  static constexpr char kLetters[] = {'R', 'I', 'S', 'B', 'U', 'J'};
  return kLetters[static_cast<int>(format)];
}

std::span<const OpSpec> opspecs() { return kTable; }

const OpSpec& opspec(Mnemonic id) { return kTable[static_cast<std::size_t>(id)]; }

std::string_view mnemonic_name(Mnemonic id) { return opspec(id).mnemonic; }

std::optional<std::reference_wrapper<const OpSpec>> find_opspec(std::string_view mnemonic) {
  for (const auto& spec : kTable)
    if (iequals(spec.mnemonic, mnemonic)) return std::cref(spec);
  return std::nullopt;
}

const OpSpec& lookup_opspec(std::string_view mnemonic) {
  if (auto spec = find_opspec(mnemonic)) return spec->get();
  throw Error(ErrorCode::UnknownMnemonic, fmt::format("unknown instruction '{}'", mnemonic));
}

std::int32_t sign_extend(std::uint32_t value, int bits) {
  if (bits < 1 || bits > 31 || value >= (std::uint32_t{1} << bits))
    throw std::invalid_argument(fmt::format("sign_extend: {:#x} does not fit in {} bits", value, bits));
  const std::uint32_t sign = std::uint32_t{1} << (bits - 1);
  return static_cast<std::int32_t>((value ^ sign) - sign);
}

ImmediateRange immediate_range(const OpSpec& spec) {
  if (spec.fixed_imm) return {*spec.fixed_imm, *spec.fixed_imm, 1};
  if (spec.is_shift_immediate()) return {0, 31, 1};
  switch (spec.format) {
    case Format::I:
    case Format::S: return {-2048, 2047, 1};
    case Format::B: return {-4096, 4094, 2};
    case Format::U: return {INT32_MIN, INT32_MAX - 4095, 4096};
    case Format::J: return {-(1 << 20), (1 << 20) - 2, 2};
    case Format::R: break;
  }
  return {0, 0, 1};
}

Word encode(const DecodedInstruction& instr) {
  const OpSpec& spec = instr.spec();
  switch (spec.format) {
    case Format::R: require_fields(spec, instr, true, true, true, false); break;
    case Format::I: require_fields(spec, instr, true, true, false, true); break;
    case Format::S:
    case Format::B: require_fields(spec, instr, false, true, true, true); break;
    case Format::U:
    case Format::J: require_fields(spec, instr, true, false, false, true); break;
  }

  if (instr.imm) {
    const auto range = immediate_range(spec);
    const std::int64_t imm = *instr.imm;
    if (imm < range.min || imm > range.max || imm % range.step != 0)
      throw Error(ErrorCode::ImmediateOutOfRange,
                  fmt::format("{}: immediate {} outside [{}, {}]{}", spec.mnemonic, imm, range.min,
                              range.max,
                              range.step > 1 ? fmt::format(" or not a multiple of {}", range.step) : ""));
  }
  if (spec.fixed_imm && (reg(instr.rd) != 0 || reg(instr.rs1) != 0))
    invalid_operands(spec, "rd and rs1 must be x0");

  const Word imm = static_cast<Word>(instr.imm.value_or(0));
  Word word = spec.opcode;
  word |= spec.funct3.value_or(0) << 12;
  switch (spec.format) {
    case Format::R:
      word |= reg(instr.rd) << 7 | reg(instr.rs1) << 15 | reg(instr.rs2) << 20 |
              Word{*spec.funct7} << 25;
      break;
    case Format::I:
      word |= reg(instr.rd) << 7 | reg(instr.rs1) << 15 | bits(imm, 11, 0) << 20;
      if (spec.funct7) word |= Word{*spec.funct7} << 25;
      break;
    case Format::S:
      word |= bits(imm, 4, 0) << 7 | reg(instr.rs1) << 15 | reg(instr.rs2) << 20 |
              bits(imm, 11, 5) << 25;
      break;
    case Format::B:
      word |= bits(imm, 11, 11) << 7 | bits(imm, 4, 1) << 8 | reg(instr.rs1) << 15 |
              reg(instr.rs2) << 20 | bits(imm, 10, 5) << 25 | bits(imm, 12, 12) << 31;
      break;
    case Format::U: word |= reg(instr.rd) << 7 | (imm & 0xFFFFF000u); break;
    case Format::J:
      word |= reg(instr.rd) << 7 | bits(imm, 19, 12) << 12 | bits(imm, 11, 11) << 20 |
              bits(imm, 10, 1) << 21 | bits(imm, 20, 20) << 31;
      break;
  }
  return word;
}

namespace {

const OpSpec* match(Word word) {
  const auto opcode = bits(word, 6, 0);
  const auto funct3 = bits(word, 14, 12);
  const auto funct7 = bits(word, 31, 25);
  for (const auto& spec : kTable) {
    if (spec.opcode != opcode) continue;
    if (spec.funct3 && *spec.funct3 != funct3) continue;
    if (spec.funct7 && *spec.funct7 != funct7) continue;
    if (spec.fixed_imm &&
        (bits(word, 31, 20) != *spec.fixed_imm || bits(word, 19, 15) != 0 || bits(word, 11, 7) != 0))
      continue;
    return &spec;
  }
  return nullptr;
}

}  // namespace

std::optional<DecodedInstruction> try_decode(Word word) noexcept {
  const OpSpec* spec = match(word);
  if (spec == nullptr) return std::nullopt;

  DecodedInstruction out;
  out.op = spec->id;
  const RegisterIndex rd{bits(word, 11, 7)};
  const RegisterIndex rs1{bits(word, 19, 15)};
  const RegisterIndex rs2{bits(word, 24, 20)};
  switch (spec->format) {
    case Format::R:
      out.rd = rd;
      out.rs1 = rs1;
      out.rs2 = rs2;
      break;
    case Format::I:
      out.rd = rd;
      out.rs1 = rs1;
      out.imm = spec->is_shift_immediate() ? static_cast<std::int32_t>(bits(word, 24, 20))
                                           : sign_extend(bits(word, 31, 20), 12);
      break;
    case Format::S:
      out.rs1 = rs1;
      out.rs2 = rs2;
      out.imm = sign_extend(bits(word, 31, 25) << 5 | bits(word, 11, 7), 12);
      break;
    case Format::B:
      out.rs1 = rs1;
      out.rs2 = rs2;
      out.imm = sign_extend(bits(word, 31, 31) << 12 | bits(word, 7, 7) << 11 |
                                bits(word, 30, 25) << 5 | bits(word, 11, 8) << 1,
                            13);
      break;
    case Format::U:
      out.rd = rd;
      out.imm = static_cast<std::int32_t>(word & 0xFFFFF000u);
      break;
    case Format::J:
      out.rd = rd;
      out.imm = sign_extend(bits(word, 31, 31) << 20 | bits(word, 19, 12) << 12 |
                                bits(word, 20, 20) << 11 | bits(word, 30, 21) << 1,
                            21);
      break;
  }
  return out;
}

DecodedInstruction decode(Word word) {
  if (auto decoded = try_decode(word)) return *decoded;
  throw Error(ErrorCode::IllegalInstruction, fmt::format("illegal instruction {:#010x}", word));
}

FieldBreakdown breakdown(Word word) {
  const OpSpec& spec = decode(word).spec();

  struct Piece {
    int hi, lo;
    std::string_view name;
  };
  std::vector<Piece> layout;
  switch (spec.format) {
    case Format::R:
      layout = {{31, 25, "funct7"}, {24, 20, "rs2"}, {19, 15, "rs1"},
                {14, 12, "funct3"}, {11, 7, "rd"},   {6, 0, "opcode"}};
      break;
    case Format::I:
      if (spec.is_shift_immediate())
        layout = {{31, 25, "funct7"}, {24, 20, "shamt"}, {19, 15, "rs1"},
                  {14, 12, "funct3"}, {11, 7, "rd"},     {6, 0, "opcode"}};
      else
        layout = {{31, 20, "imm"}, {19, 15, "rs1"}, {14, 12, "funct3"}, {11, 7, "rd"}, {6, 0, "opcode"}};
      break;
    case Format::S:
      layout = {{31, 25, "imm[11:5]"}, {24, 20, "rs2"},      {19, 15, "rs1"},
                {14, 12, "funct3"},    {11, 7, "imm[4:0]"}, {6, 0, "opcode"}};
      break;
    case Format::B:
      layout = {{31, 25, "imm[12|10:5]"}, {24, 20, "rs2"},         {19, 15, "rs1"},
                {14, 12, "funct3"},       {11, 7, "imm[4:1|11]"}, {6, 0, "opcode"}};
      break;
    case Format::U: layout = {{31, 12, "imm[31:12]"}, {11, 7, "rd"}, {6, 0, "opcode"}}; break;
    case Format::J:
      layout = {{31, 12, "imm[20|10:1|11|19:12]"}, {11, 7, "rd"}, {6, 0, "opcode"}};
      break;
  }

  FieldBreakdown out;
  out.reserve(layout.size());
  for (const auto& piece : layout)
    out.push_back({piece.hi, piece.lo, std::string(piece.name),
                   binary(bits(word, piece.hi, piece.lo), piece.hi - piece.lo + 1)});
  return out;
}

std::optional<RegisterIndex> parse_register(std::string_view name) noexcept {
  if (name.size() >= 2 && (name[0] == 'x' || name[0] == 'X')) {
    unsigned index = 0;
    auto digits = name.substr(1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    // reject "x05" and similar so that spelling stays canonical
    if (ec == std::errc{} && ptr == digits.data() + digits.size() && index <= 31 &&
        (digits.size() == 1 || digits[0] != '0'))
      return RegisterIndex{index};
    return std::nullopt;
  }
  if (iequals(name, "fp")) return RegisterIndex{8};
  for (unsigned i = 0; i < kAbiNames.size(); ++i)
    if (iequals(name, kAbiNames[i])) return RegisterIndex{i};
  return std::nullopt;
}

RegisterIndex register_name_to_index(std::string_view name) {
  if (auto reg = parse_register(name)) return *reg;
  throw Error(ErrorCode::UnknownRegister, fmt::format("unknown register '{}'", name));
}

std::string_view abi_name(RegisterIndex reg) { return kAbiNames[reg.value()]; }

std::string disassemble(const DecodedInstruction& instr) {
  const OpSpec& spec = instr.spec();
  auto r = [](const std::optional<RegisterIndex>& idx) { return fmt::format("x{}", reg(idx)); };
  const std::int32_t imm = instr.imm.value_or(0);

  if (spec.fixed_imm || spec.id == Mnemonic::FENCE) return std::string(spec.mnemonic);
  switch (spec.format) {
    case Format::R:
      return fmt::format("{} {}, {}, {}", spec.mnemonic, r(instr.rd), r(instr.rs1), r(instr.rs2));
    case Format::I:
      if (spec.opcode == kOpLoad || spec.id == Mnemonic::JALR)
        return fmt::format("{} {}, {}({})", spec.mnemonic, r(instr.rd), imm, r(instr.rs1));
      return fmt::format("{} {}, {}, {}", spec.mnemonic, r(instr.rd), r(instr.rs1), imm);
    case Format::S:
      return fmt::format("{} {}, {}({})", spec.mnemonic, r(instr.rs2), imm, r(instr.rs1));
    case Format::B:
      return fmt::format("{} {}, {}, {}", spec.mnemonic, r(instr.rs1), r(instr.rs2), imm);
    case Format::U:
      return fmt::format("{} {}, {:#x}", spec.mnemonic, r(instr.rd), static_cast<Word>(imm) >> 12);
    case Format::J: return fmt::format("{} {}, {}", spec.mnemonic, r(instr.rd), imm);
  }
  return std::string(spec.mnemonic);
}

}  // namespace rvwb
