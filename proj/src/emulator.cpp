#include "rvwb/emulator.hpp"

#include <fmt/format.h>

namespace rvwb {

const char* to_string(Halt halt) {
  switch (halt) {
    case Halt::running: return "running";
    case Halt::exit: return "exit";
    case Halt::breakpoint: return "breakpoint";
    case Halt::step_limit: return "step_limit";
    case Halt::fault: return "fault";
    case Halt::ecall: return "ecall";
    case Halt::ebreak: return "ebreak";
  }
  return "fault";
}

std::optional<Halt> halt_from_string(std::string_view name) {
  for (auto h : {Halt::running, Halt::exit, Halt::breakpoint, Halt::step_limit, Halt::fault, Halt::ecall,
                 Halt::ebreak})
    if (name == to_string(h)) return h;
  return std::nullopt;
}

bool is_terminal(Halt halt) {
  return halt == Halt::exit || halt == Halt::fault || halt == Halt::ecall || halt == Halt::ebreak;
}

MachineState setup_emulator(const AssembledProgram& program) {
  MachineState state;
  state.pc = program.entry_address;
  for (const auto& text : program.text_image) state.memory[text.address] = text.word;
  for (const auto& [address, word] : program.data_image) state.memory[address] = word;
  return state;
}

namespace {

void check_alignment(Word address, AccessWidth width) {
  const auto bytes = static_cast<unsigned>(width);
  if (address % bytes != 0)
    throw Error(ErrorCode::MisalignedAccess,
                fmt::format("misaligned {}-byte access at {:#010x}", bytes, address));
}

Word mask_for(AccessWidth width) {
  return width == AccessWidth::word ? 0xFFFFFFFFu : (Word{1} << (8 * static_cast<unsigned>(width))) - 1;
}

}  // namespace

Word read_memory(const MachineState& state, Word address, AccessWidth width, bool is_signed) {
  check_alignment(address, width);
  auto it = state.memory.find(address & ~3u);
  const Word word = it == state.memory.end() ? 0 : it->second;
  const unsigned shift = 8 * (address & 3u);
  const Word value = (word >> shift) & mask_for(width);
  if (is_signed && width != AccessWidth::word)
    return static_cast<Word>(sign_extend(value, 8 * static_cast<int>(width)));
  return value;
}

void write_memory(MachineState& state, Word address, AccessWidth width, Word value,
                  std::vector<MemoryChange>* changes) {
  check_alignment(address, width);
  const Word aligned = address & ~3u;
  const unsigned shift = 8 * (address & 3u);
  const Word mask = mask_for(width) << shift;

  auto [it, inserted] = state.memory.try_emplace(aligned, 0);
  const Word old_value = it->second;
  it->second = (old_value & ~mask) | ((value << shift) & mask);
  if (changes && it->second != old_value) changes->push_back({aligned, old_value, it->second});
}

StepResult single_step(MachineState& state, const AssembledProgram& program) {
  StepResult result;
  result.pc_before = state.pc;
  result.pc_after = state.pc;
  if (is_terminal(state.halt)) {
    result.halt = state.halt;
    return result;
  }
  state.halt = Halt::running;

  auto fault = [&](std::string detail) {
    state.halt = Halt::fault;
    state.fault_detail = std::move(detail);
    result.halt = Halt::fault;
    return result;
  };

  const Word pc = state.pc;
  if (!program.is_instruction_address(pc))
    return fault(fmt::format("IllegalInstruction: fetch from {:#010x} outside the program text", pc));
  const auto decoded = try_decode(read_memory(state, pc, AccessWidth::word));
  if (!decoded)
    return fault(fmt::format("IllegalInstruction: {:#010x} at {:#010x}",
                             read_memory(state, pc, AccessWidth::word), pc));

  const auto& in = *decoded;
  auto& x = state.regs;
  const Word a = in.rs1 ? x[in.rs1->value()] : 0;
  const Word b = in.rs2 ? x[in.rs2->value()] : 0;
  const Word imm = static_cast<Word>(in.imm.value_or(0));
  const auto sa = static_cast<std::int32_t>(a);
  const auto sb = static_cast<std::int32_t>(b);
  const auto simm = static_cast<std::int32_t>(imm);

  std::optional<Word> rd_value;
  Word next_pc = pc + 4;
  bool jumped = false;
  std::optional<std::pair<AccessWidth, Word>> store;

  try {
    switch (in.op) {
      case Mnemonic::LUI: rd_value = imm; break;
      case Mnemonic::AUIPC: rd_value = pc + imm; break;
      case Mnemonic::JAL:
        rd_value = pc + 4;
        next_pc = pc + imm;
        jumped = true;
        break;
      case Mnemonic::JALR:
        rd_value = pc + 4;
        next_pc = (a + imm) & ~1u;
        jumped = true;
        break;

      case Mnemonic::BEQ: jumped = a == b; break;
      case Mnemonic::BNE: jumped = a != b; break;
      case Mnemonic::BLT: jumped = sa < sb; break;
      case Mnemonic::BGE: jumped = sa >= sb; break;
      case Mnemonic::BLTU: jumped = a < b; break;
      case Mnemonic::BGEU: jumped = a >= b; break;

      case Mnemonic::LB: rd_value = read_memory(state, a + imm, AccessWidth::byte, true); break;
      case Mnemonic::LH: rd_value = read_memory(state, a + imm, AccessWidth::half, true); break;
      case Mnemonic::LW: rd_value = read_memory(state, a + imm, AccessWidth::word); break;
      case Mnemonic::LBU: rd_value = read_memory(state, a + imm, AccessWidth::byte); break;
      case Mnemonic::LHU: rd_value = read_memory(state, a + imm, AccessWidth::half); break;

      case Mnemonic::SB: store = {AccessWidth::byte, b}; break;
      case Mnemonic::SH: store = {AccessWidth::half, b}; break;
      case Mnemonic::SW: store = {AccessWidth::word, b}; break;

      case Mnemonic::ADDI: rd_value = a + imm; break;
      case Mnemonic::SLTI: rd_value = sa < simm ? 1 : 0; break;
      case Mnemonic::SLTIU: rd_value = a < imm ? 1 : 0; break;
      case Mnemonic::XORI: rd_value = a ^ imm; break;
      case Mnemonic::ORI: rd_value = a | imm; break;
      case Mnemonic::ANDI: rd_value = a & imm; break;
      case Mnemonic::SLLI: rd_value = a << (imm & 31); break;
      case Mnemonic::SRLI: rd_value = a >> (imm & 31); break;
      case Mnemonic::SRAI: rd_value = static_cast<Word>(sa >> (imm & 31)); break;

      case Mnemonic::ADD: rd_value = a + b; break;
      case Mnemonic::SUB: rd_value = a - b; break;
      case Mnemonic::SLL: rd_value = a << (b & 31); break;
      case Mnemonic::SLT: rd_value = sa < sb ? 1 : 0; break;
      case Mnemonic::SLTU: rd_value = a < b ? 1 : 0; break;
      case Mnemonic::XOR: rd_value = a ^ b; break;
      case Mnemonic::SRL: rd_value = a >> (b & 31); break;
      case Mnemonic::SRA: rd_value = static_cast<Word>(sa >> (b & 31)); break;
      case Mnemonic::OR: rd_value = a | b; break;
      case Mnemonic::AND: rd_value = a & b; break;

      case Mnemonic::MUL: rd_value = a * b; break;
      case Mnemonic::MULH:
        rd_value = static_cast<Word>((std::int64_t{sa} * std::int64_t{sb}) >> 32);
        break;
      case Mnemonic::MULHSU:
        rd_value = static_cast<Word>((std::int64_t{sa} * static_cast<std::int64_t>(b)) >> 32);
        break;
      case Mnemonic::MULHU:
        rd_value = static_cast<Word>((std::uint64_t{a} * std::uint64_t{b}) >> 32);
        break;

      case Mnemonic::FENCE: break;
      case Mnemonic::ECALL:
      case Mnemonic::EBREAK:
        state.halt = in.op == Mnemonic::ECALL ? Halt::ecall : Halt::ebreak;
        ++state.step_count;
        result.halt = state.halt;
        return result;
    }
    if (store) read_memory(state, a + imm, store->first);  // alignment check before any commit
  } catch (const Error& e) {
    return fault(fmt::format("MisalignedAccess: {} (instruction at {:#010x})", e.what(), pc));
  }

  if (jumped && in.spec().format == Format::B) next_pc = pc + imm;
  if (next_pc % 4 != 0)
    return fault(fmt::format("misaligned jump target {:#010x} (instruction at {:#010x})", next_pc, pc));
  if (next_pc < program.text_base || next_pc >= program.text_end)
    return fault(fmt::format("jump target {:#010x} outside the text segment (instruction at {:#010x})",
                             next_pc, pc));

  if (store) write_memory(state, a + imm, store->first, store->second, &result.changed_memory);
  if (rd_value && in.rd && !in.rd->is_zero()) {
    auto& slot = x[in.rd->value()];
    if (slot != *rd_value) result.changed_registers.insert(*in.rd);
    slot = *rd_value;
  }
  state.pc = next_pc;
  ++state.step_count;
  if (state.pc == program.exit_address) state.halt = Halt::exit;

  result.pc_after = state.pc;
  result.halt = state.halt;
  return result;
}

void Breakpoints::set(const AssembledProgram& program, Word address) {
  if (!program.is_instruction_address(address))
    throw Error(ErrorCode::NotAnInstructionAddress, fmt::format("{:#010x} is not an instruction address", address));
  addresses_.insert(address);
}

void Breakpoints::clear(const AssembledProgram& program, Word address) {
  if (!program.is_instruction_address(address))
    throw Error(ErrorCode::NotAnInstructionAddress, fmt::format("{:#010x} is not an instruction address", address));
  addresses_.erase(address);
}

std::uint64_t run(MachineState& state, const AssembledProgram& program, const Breakpoints& breakpoints,
                  std::uint64_t max_steps) {
  if (is_terminal(state.halt)) return 0;
  state.halt = Halt::running;

  std::uint64_t steps = 0;
  for (;;) {
    if (state.pc == program.exit_address) {
      state.halt = Halt::exit;
      break;
    }
    if (steps > 0 && breakpoints.contains(state.pc)) {
      state.halt = Halt::breakpoint;
      break;
    }
    if (steps == max_steps) {
      state.halt = Halt::step_limit;
      break;
    }
    single_step(state, program);
    ++steps;
    if (state.halt != Halt::running) break;
  }
  return steps;
}

}  // namespace rvwb
