#pragma once

// Debug session: load/step/run/breakpoint commands over one machine, and
// the full state snapshot the UI and CLI render from.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rvwb/assembler.hpp"
#include "rvwb/emulator.hpp"
#include "rvwb/isa.hpp"

namespace rvwb {

struct LayoutConfig {
  Word text_base = 0x00000000;
  Word data_base = 0x10000000;
  Word heap_base = 0x10010000;
  Word stack_top = 0x7FFFFFF0;

  /// Throws Error(InvalidConfig) unless text_base < data_base <= heap_base < stack_top.
  void validate() const;
  KernelConfig kernel() const { return {text_base, data_base, stack_top}; }
  /// Writes at or above this address count as stack, below it as heap.
  Word stack_floor() const { return heap_base + (stack_top - heap_base) / 2; }

  friend bool operator==(const LayoutConfig&, const LayoutConfig&) = default;
};

struct ListingLine {
  std::optional<Word> address;
  std::string text;
  ItemKind kind = ItemKind::instruction;
  bool is_kernel = false;
  bool is_current = false;
  bool has_breakpoint = false;
  int line = 0;
  bool is_label = false;

  friend bool operator==(const ListingLine&, const ListingLine&) = default;
};

struct MemoryWord {
  Word address;
  Word value;
  std::optional<std::string> comment;

  friend bool operator==(const MemoryWord&, const MemoryWord&) = default;
};

enum class RegionName { stack, free, heap, data, text };

const char* to_string(RegionName name);
std::optional<RegionName> region_from_string(std::string_view name);

/// Half-open [start, end). `end` is 64-bit so a region may reach 2^32.
struct MemoryRegion {
  RegionName name;
  Word start = 0;
  std::uint64_t end = 0;
  std::vector<MemoryWord> words;  // descending by address

  friend bool operator==(const MemoryRegion&, const MemoryRegion&) = default;
};

/// The five regions in display order: stack, free, heap, data, text.
std::vector<MemoryRegion> memory_regions(const MachineState& state, const LayoutConfig& layout,
                                         const AssembledProgram& program);

struct StateSnapshot {
  Word pc = 0;
  std::array<Word, 32> registers{};
  std::vector<RegisterIndex> changed_registers;
  std::vector<ListingLine> listing;
  std::optional<FieldBreakdown> current_breakdown;
  std::vector<MemoryRegion> memory_regions;
  Halt halt = Halt::running;
  std::uint64_t step_count = 0;
  std::vector<Word> breakpoints;

  friend bool operator==(const StateSnapshot&, const StateSnapshot&) = default;
};

StateSnapshot snapshot(const MachineState& state, const AssembledProgram& program, const Breakpoints& breakpoints,
                       std::span<const RegisterIndex> last_changes, const LayoutConfig& layout = {});

namespace command {
struct Load {
  std::string source;
};
struct Step {
  std::int64_t count = 1;
};
struct Run {
  std::uint64_t max_steps = kDefaultMaxSteps;
};
struct SetBreak {
  Word address = 0;
};
struct ClearBreak {
  Word address = 0;
};
struct Reset {};
struct GetState {};
}  // namespace command

using Command = std::variant<command::Load, command::Step, command::Run, command::SetBreak, command::ClearBreak,
                             command::Reset, command::GetState>;

struct Response {
  std::optional<StateSnapshot> snapshot;  // present iff ok
  std::string error;
  std::optional<int> line;

  bool ok() const { return snapshot.has_value(); }
  static Response success(StateSnapshot s) { return {std::move(s), {}, std::nullopt}; }
  static Response failure(std::string message, std::optional<int> line = std::nullopt) {
    return {std::nullopt, std::move(message), line};
  }

  friend bool operator==(const Response&, const Response&) = default;
};

/// One program, one machine, one breakpoint set. Not thread-safe; callers
/// serialize commands per session.
class Session {
 public:
  explicit Session(LayoutConfig layout = {});

  /// Every command yields exactly one response; error responses leave the
  /// session untouched.
  Response handle(const Command& command);

  bool loaded() const { return loaded_.has_value(); }
  const AssembledProgram* program() const { return loaded_ ? &loaded_->program : nullptr; }
  const MachineState* state() const { return loaded_ ? &loaded_->state : nullptr; }
  const CombinedSource* source() const { return loaded_ ? &loaded_->source : nullptr; }
  const Breakpoints& breakpoints() const { return breakpoints_; }
  const LayoutConfig& layout() const { return layout_; }

  /// Throws Error(NoProgramLoaded).
  StateSnapshot current_snapshot() const;

 private:
  struct Loaded {
    CombinedSource source;
    AssembledProgram program;
    MachineState state;
  };

  Response load(const command::Load& cmd);
  Response step(const command::Step& cmd);
  Response run(const command::Run& cmd);
  Response set_break(Word address, bool set);
  Response reset();
  Response get_state() const;

  void record_changes(const std::array<Word, 32>& before);

  LayoutConfig layout_;
  std::optional<Loaded> loaded_;
  Breakpoints breakpoints_;
  std::vector<RegisterIndex> last_changed_;
};

}  // namespace rvwb
