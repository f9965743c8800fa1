#pragma once

// Machine state, sparse memory and the fetch-decode-execute loop.

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rvwb/assembler.hpp"
#include "rvwb/isa.hpp"

namespace rvwb {

enum class Halt { running, exit, breakpoint, step_limit, fault, ecall, ebreak };

const char* to_string(Halt halt);
std::optional<Halt> halt_from_string(std::string_view name);

/// exit, fault, ecall and ebreak end execution; breakpoint and step_limit
/// are pauses that step/run may resume from.
bool is_terminal(Halt halt);

inline constexpr std::uint64_t kDefaultMaxSteps = 1'000'000;

struct MachineState {
  std::array<Word, 32> regs{};
  Word pc = 0;
  std::map<Word, Word> memory;  // word-aligned address -> word; only touched words exist
  Halt halt = Halt::running;
  std::uint64_t step_count = 0;
  std::string fault_detail;

  friend bool operator==(const MachineState&, const MachineState&) = default;
};

struct MemoryChange {
  Word address;
  Word old_value;
  Word new_value;

  friend bool operator==(const MemoryChange&, const MemoryChange&) = default;
};

struct StepResult {
  Word pc_before = 0;
  Word pc_after = 0;
  std::set<RegisterIndex> changed_registers;
  std::vector<MemoryChange> changed_memory;
  Halt halt = Halt::running;

  friend bool operator==(const StepResult&, const StepResult&) = default;
};

/// Zeroed registers, pc at the entry point, text and data images preloaded.
MachineState setup_emulator(const AssembledProgram& program);

enum class AccessWidth : unsigned { byte = 1, half = 2, word = 4 };

/// Never-written locations read as 0. Throws Error(MisalignedAccess).
Word read_memory(const MachineState& state, Word address, AccessWidth width, bool is_signed = false);

/// Read-modify-write of the containing little-endian word; materializes it.
/// Appends to `changes` when the stored word actually changes.
/// Throws Error(MisalignedAccess).
void write_memory(MachineState& state, Word address, AccessWidth width, Word value,
                  std::vector<MemoryChange>* changes = nullptr);

/// Executes the instruction at pc. Faults, ecall and ebreak are reported
/// through state.halt; landing on the exit loop sets Halt::exit.
StepResult single_step(MachineState& state, const AssembledProgram& program);

class Breakpoints {
 public:
  /// Idempotent. Throws Error(NotAnInstructionAddress).
  void set(const AssembledProgram& program, Word address);
  void clear(const AssembledProgram& program, Word address);

  bool contains(Word address) const { return addresses_.contains(address); }
  bool empty() const { return addresses_.empty(); }
  std::size_t size() const { return addresses_.size(); }
  auto begin() const { return addresses_.begin(); }
  auto end() const { return addresses_.end(); }

  friend bool operator==(const Breakpoints&, const Breakpoints&) = default;

 private:
  std::set<Word> addresses_;
};

/// Steps until the exit loop, a breakpoint (after at least one step), a
/// fault/ecall/ebreak, or the step budget runs out. Resumes from a
/// breakpoint or step_limit pause. Returns the number of steps executed.
std::uint64_t run(MachineState& state, const AssembledProgram& program, const Breakpoints& breakpoints,
                  std::uint64_t max_steps = kDefaultMaxSteps);

}  // namespace rvwb
