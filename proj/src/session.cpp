#include "rvwb/session.hpp"

#include <algorithm>
#include <fmt/format.h>

namespace rvwb {

void LayoutConfig::validate() const {
  if (text_base % 4 || data_base % 4 || heap_base % 4 || stack_top % 4)
    throw Error(ErrorCode::InvalidConfig, "layout addresses must be 4-aligned");
  if (!(text_base < data_base && data_base <= heap_base && heap_base < stack_top))
    throw Error(ErrorCode::InvalidConfig, "layout must satisfy text_base < data_base <= heap_base < stack_top");
}

const char* to_string(RegionName name) {
  switch (name) {
    case RegionName::stack: return "stack";
    case RegionName::free: return "free";
    case RegionName::heap: return "heap";
    case RegionName::data: return "data";
    case RegionName::text: return "text";
  }
  return "free";
}

std::optional<RegionName> region_from_string(std::string_view name) {
  for (auto r : {RegionName::stack, RegionName::free, RegionName::heap, RegionName::data, RegionName::text})
    if (name == to_string(r)) return r;
  return std::nullopt;
}

std::vector<MemoryRegion> memory_regions(const MachineState& state, const LayoutConfig& layout,
                                         const AssembledProgram& program) {
  const Word stack_floor = layout.stack_floor();
  const Word heap_start = std::min(std::max(layout.heap_base, program.data_end), stack_floor);

  MemoryRegion stack{RegionName::stack, layout.stack_top, layout.stack_top, {}};
  MemoryRegion heap{RegionName::heap, heap_start, heap_start, {}};
  MemoryRegion data{RegionName::data, layout.data_base, std::max<std::uint64_t>(program.data_end, layout.data_base), {}};
  MemoryRegion text{RegionName::text, program.text_base, program.text_end, {}};

  // descending walk so every region's word list comes out in display order
  for (auto it = state.memory.rbegin(); it != state.memory.rend(); ++it) {
    const auto [address, value] = *it;
    MemoryRegion* region = nullptr;
    if (address < layout.data_base) {
      region = &text;
    } else if (address < heap_start) {
      region = &data;
    } else if (address < stack_floor) {
      region = &heap;
    } else {
      region = &stack;
    }
    std::optional<std::string> comment;
    if (region == &text) {
      auto decoded = try_decode(value);
      comment = decoded ? disassemble(*decoded) : fmt::format(".word {:#010x}", value);
    }
    region->words.push_back({address, value, std::move(comment)});
    region->start = std::min(region->start, address);
    region->end = std::max<std::uint64_t>(region->end, std::uint64_t{address} + 4);
  }

  MemoryRegion free{RegionName::free, static_cast<Word>(heap.end), stack.start, {}};
  return {std::move(stack), std::move(free), std::move(heap), std::move(data), std::move(text)};
}

StateSnapshot snapshot(const MachineState& state, const AssembledProgram& program, const Breakpoints& breakpoints,
                       std::span<const RegisterIndex> last_changes, const LayoutConfig& layout) {
  StateSnapshot out;
  out.pc = state.pc;
  out.registers = state.regs;
  out.changed_registers.assign(last_changes.begin(), last_changes.end());
  out.halt = state.halt;
  out.step_count = state.step_count;
  out.breakpoints.assign(breakpoints.begin(), breakpoints.end());

  out.listing.reserve(program.items.size());
  for (const auto& item : program.items) {
    ListingLine line;
    line.address = item.address;
    line.text = format_item(item);
    line.kind = item.kind;
    line.is_kernel = item.is_kernel;
    line.line = item.line;
    line.is_label = item.kind == ItemKind::label;
    if (item.kind == ItemKind::instruction && item.address) {
      line.is_current = *item.address == state.pc;
      line.has_breakpoint = breakpoints.contains(*item.address);
    }
    out.listing.push_back(std::move(line));
  }

  if (state.pc % 4 == 0) {
    const Word word = read_memory(state, state.pc, AccessWidth::word);
    if (try_decode(word)) out.current_breakdown = breakdown(word);
  }

  out.memory_regions = memory_regions(state, layout, program);
  return out;
}

Session::Session(LayoutConfig layout) : layout_(layout) { layout_.validate(); }

StateSnapshot Session::current_snapshot() const {
  if (!loaded_) throw Error(ErrorCode::NoProgramLoaded, "no program loaded");
  return snapshot(loaded_->state, loaded_->program, breakpoints_, last_changed_, layout_);
}

Response Session::handle(const Command& command) {
  return std::visit(
      [this](const auto& cmd) -> Response {
        using T = std::decay_t<decltype(cmd)>;
        if constexpr (std::is_same_v<T, command::Load>) {
          return load(cmd);
        } else if constexpr (std::is_same_v<T, command::Step>) {
          return step(cmd);
        } else if constexpr (std::is_same_v<T, command::Run>) {
          return run(cmd);
        } else if constexpr (std::is_same_v<T, command::SetBreak>) {
          return set_break(cmd.address, true);
        } else if constexpr (std::is_same_v<T, command::ClearBreak>) {
          return set_break(cmd.address, false);
        } else if constexpr (std::is_same_v<T, command::Reset>) {
          return reset();
        } else {
          return get_state();
        }
      },
      command);
}

Response Session::load(const command::Load& cmd) {
  const KernelConfig kernel = layout_.kernel();
  auto source = wrap_with_kernel(cmd.source, kernel);
  auto parsed = parse(source, kernel);

  // error lines are reported in the user's own file numbering
  auto user_line = [&](int line) { return source.user_line(line).value_or(line); };

  if (parsed.has_errors()) {
    const auto errors = parsed.errors();
    std::string message = fmt::format("{} assembly error{}", errors.size(), errors.size() == 1 ? "" : "s");
    for (const auto& e : errors) message += fmt::format("\nline {}: {}", user_line(e.line), e.error_message);
    return Response::failure(std::move(message), user_line(errors.front().line));
  }

  try {
    auto program = resolve_and_encode(parsed, kernel);
    auto state = setup_emulator(program);
    loaded_ = Loaded{std::move(source), std::move(program), std::move(state)};
  } catch (const Error& e) {
    std::optional<int> line;
    if (e.line()) line = user_line(*e.line());
    return Response::failure(line ? fmt::format("line {}: {}", *line, e.what()) : e.what(), line);
  }
  breakpoints_ = {};
  last_changed_.clear();
  return Response::success(current_snapshot());
}

namespace {

std::string halted_message(const MachineState& state) {
  if (state.halt == Halt::fault) return fmt::format("halted: fault ({})", state.fault_detail);
  return fmt::format("halted: {}", to_string(state.halt));
}

}  // namespace

void Session::record_changes(const std::array<Word, 32>& before) {
  last_changed_.clear();
  for (unsigned i = 1; i < 32; ++i)
    if (before[i] != loaded_->state.regs[i]) last_changed_.emplace_back(i);
}

Response Session::step(const command::Step& cmd) {
  if (!loaded_) return Response::failure("no program loaded");
  if (cmd.count < 1) return Response::failure("step count must be at least 1");
  auto& state = loaded_->state;
  if (is_terminal(state.halt)) return Response::failure(halted_message(state));

  const auto before = state.regs;
  for (std::int64_t i = 0; i < cmd.count; ++i) {
    single_step(state, loaded_->program);
    if (state.halt != Halt::running) break;
  }
  record_changes(before);
  return Response::success(current_snapshot());
}

Response Session::run(const command::Run& cmd) {
  if (!loaded_) return Response::failure("no program loaded");
  auto& state = loaded_->state;
  if (is_terminal(state.halt)) return Response::failure(halted_message(state));

  const auto before = state.regs;
  rvwb::run(state, loaded_->program, breakpoints_, cmd.max_steps);
  record_changes(before);
  return Response::success(current_snapshot());
}

Response Session::set_break(Word address, bool set) {
  if (!loaded_) return Response::failure("no program loaded");
  try {
    auto updated = breakpoints_;
    if (set)
      updated.set(loaded_->program, address);
    else
      updated.clear(loaded_->program, address);
    breakpoints_ = std::move(updated);
  } catch (const Error& e) {
    return Response::failure(e.what());
  }
  return Response::success(current_snapshot());
}

Response Session::reset() {
  if (!loaded_) return Response::failure("no program loaded");
  loaded_->state = setup_emulator(loaded_->program);
  last_changed_.clear();
  return Response::success(current_snapshot());
}

Response Session::get_state() const {
  if (!loaded_) return Response::failure("no program loaded");
  return Response::success(current_snapshot());
}

}  // namespace rvwb
