#include "rvwb/repl.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace rvwb::repl {

namespace {

std::vector<std::string> words(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

const char* kHelp =
    "commands:\n"
    "  load <file>              assemble and load a program\n"
    "  step [n]                 execute n instructions (default 1)\n"
    "  run [max]                run to exit, breakpoint or step limit\n"
    "  break <addr|label>       set a breakpoint\n"
    "  unbreak <addr|label>     remove a breakpoint\n"
    "  regs [hex|dec|bin]       show the register file\n"
    "  mem <addr> <nwords>      show memory words\n"
    "  list                     show the program listing\n"
    "  reset                    restart the loaded program\n"
    "  quit                     leave\n";

}  // namespace

std::optional<Radix> parse_radix(std::string_view name) {
  if (name == "hex") return Radix::hex;
  if (name == "dec") return Radix::dec;
  if (name == "bin") return Radix::bin;
  return std::nullopt;
}

std::string format_value(Word value, Radix radix) {
  switch (radix) {
    case Radix::hex: return fmt::format("{:#010x}", value);
    case Radix::dec: return std::to_string(static_cast<std::int32_t>(value));
    case Radix::bin: return fmt::format("0b{:032b}", value);
  }
  return {};
}

std::string format_registers(const StateSnapshot& snapshot, Radix radix) {
  std::string out;
  for (unsigned i = 0; i < 32; ++i) {
    const RegisterIndex reg{i};
    const bool changed = std::find(snapshot.changed_registers.begin(), snapshot.changed_registers.end(), reg) !=
                         snapshot.changed_registers.end();
    out += fmt::format("x{} ({}) = {}{}\n", i, abi_name(reg), format_value(snapshot.registers[i], radix),
                       changed ? " *" : "");
  }
  return out;
}

std::string format_listing(const StateSnapshot& snapshot) {
  std::string out;
  for (const auto& line : snapshot.listing) {
    const std::string address = line.address ? fmt::format("{:#010x}", *line.address) : std::string(10, ' ');
    const char* marker = line.is_current ? "=>" : "  ";
    const char* bp = line.has_breakpoint ? "*" : " ";
    const char* kernel = line.is_kernel ? "k" : " ";
    if (line.is_label)
      out += fmt::format("{}{}{} {}  {}\n", marker, bp, kernel, address, line.text);
    else
      out += fmt::format("{}{}{} {}      {}\n", marker, bp, kernel, address, line.text);
  }
  return out;
}

std::string format_memory(const MachineState& state, Word address, std::size_t count) {
  std::string out;
  Word a = address & ~3u;
  for (std::size_t i = 0; i < count; ++i, a += 4) {
    const Word value = read_memory(state, a, AccessWidth::word);
    out += fmt::format("{:#010x}: {:#010x}  ({})", a, value, static_cast<std::int32_t>(value));
    if (!state.memory.contains(a)) out += "  unmapped";
    out += '\n';
    if (a == 0xFFFFFFFCu) break;
  }
  return out;
}

std::string format_status(const StateSnapshot& snapshot, const MachineState& state) {
  std::string out = fmt::format("{} at pc={:#010x} after {} step{}", to_string(snapshot.halt), snapshot.pc,
                                snapshot.step_count, snapshot.step_count == 1 ? "" : "s");
  if (snapshot.halt == Halt::fault) out += fmt::format(": {}", state.fault_detail);
  out += '\n';
  for (const auto& line : snapshot.listing)
    if (line.is_current) out += fmt::format("=> {:#010x}  {}\n", *line.address, line.text);
  for (auto reg : snapshot.changed_registers)
    out += fmt::format("   x{} ({}) = {:#010x}\n", reg.value(), abi_name(reg), snapshot.registers[reg.value()]);
  return out;
}

std::optional<Word> Repl::resolve_address(std::string_view token) const {
  if (auto value = parse_integer(token); value && *value >= 0 && *value <= UINT32_MAX)
    return static_cast<Word>(*value);
  if (const auto* program = session_.program()) {
    auto it = program->labels.find(token);
    if (it != program->labels.end()) return it->second;
  }
  return std::nullopt;
}

void Repl::report(const Response& response, std::ostream& out) {
  if (!response.ok()) {
    ++errors_;
    out << "error: " << response.error << '\n';
  }
}

bool Repl::execute(std::string_view line, std::ostream& out) {
  if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
  const auto args = words(line);
  if (args.empty()) return true;
  const std::string& cmd = args[0];

  // reports the failure and keeps the REPL going
  auto fail = [&](const std::string& message) {
    ++errors_;
    out << "error: " << message << '\n';
    return true;
  };
  auto count_arg = [&](std::size_t index, std::uint64_t fallback) -> std::optional<std::uint64_t> {
    if (args.size() <= index) return fallback;
    auto value = parse_integer(args[index]);
    if (!value || *value < 0) return std::nullopt;
    return static_cast<std::uint64_t>(*value);
  };

  if (cmd == "quit" || cmd == "exit") return false;
  if (cmd == "help") {
    out << kHelp;
  } else if (cmd == "load") {
    if (args.size() != 2) return fail("usage: load <file>");
    std::ifstream file(args[1], std::ios::binary);
    if (!file) return fail(fmt::format("cannot open '{}'", args[1]));
    std::ostringstream text;
    text << file.rdbuf();
    auto response = session_.handle(command::Load{text.str()});
    report(response, out);
    if (response.ok()) {
      const auto* program = session_.program();
      out << fmt::format("loaded {}: {} instructions ({} kernel prefix), entry {:#010x}, exit {:#010x}\n", args[1],
                         program->text_image.size(), program->kernel_prefix_length, program->entry_address,
                         program->exit_address);
    }
  } else if (cmd == "step") {
    auto n = count_arg(1, 1);
    if (!n || *n == 0) return fail("usage: step [n]");
    auto response = session_.handle(command::Step{static_cast<std::int64_t>(*n)});
    report(response, out);
    if (response.ok()) out << format_status(*response.snapshot, *session_.state());
  } else if (cmd == "run") {
    auto n = count_arg(1, kDefaultMaxSteps);
    if (!n) return fail("usage: run [max_steps]");
    auto response = session_.handle(command::Run{*n});
    report(response, out);
    if (response.ok()) out << format_status(*response.snapshot, *session_.state());
  } else if (cmd == "break" || cmd == "unbreak") {
    if (args.size() != 2) return fail(fmt::format("usage: {} <addr|label>", cmd));
    if (!session_.loaded()) return fail("no program loaded");
    auto address = resolve_address(args[1]);
    if (!address) return fail(fmt::format("unknown address or label '{}'", args[1]));
    const bool set = cmd == "break";
    auto response = set ? session_.handle(command::SetBreak{*address}) : session_.handle(command::ClearBreak{*address});
    report(response, out);
    if (response.ok()) {
      const bool is_label = !parse_integer(args[1]);
      out << fmt::format("breakpoint {} at {:#010x}{}\n", set ? "set" : "cleared", *address,
                         is_label ? fmt::format(" ({})", args[1]) : "");
    }
  } else if (cmd == "regs") {
    auto radix = args.size() > 1 ? parse_radix(args[1]) : std::optional<Radix>(Radix::hex);
    if (!radix) return fail("usage: regs [hex|dec|bin]");
    auto response = session_.handle(command::GetState{});
    report(response, out);
    if (response.ok()) out << format_registers(*response.snapshot, *radix);
  } else if (cmd == "mem") {
    if (args.size() != 3) return fail("usage: mem <addr> <nwords>");
    if (!session_.loaded()) return fail("no program loaded");
    auto address = resolve_address(args[1]);
    auto n = count_arg(2, 1);
    if (!address || !n) return fail("usage: mem <addr> <nwords>");
    out << format_memory(*session_.state(), *address, static_cast<std::size_t>(*n));
  } else if (cmd == "list") {
    auto response = session_.handle(command::GetState{});
    report(response, out);
    if (response.ok()) out << format_listing(*response.snapshot);
  } else if (cmd == "reset") {
    auto response = session_.handle(command::Reset{});
    report(response, out);
    if (response.ok()) out << fmt::format("reset: pc={:#010x}\n", response.snapshot->pc);
  } else {
    return fail(fmt::format("unknown command '{}' (try 'help')", cmd));
  }
  return true;
}

int run(std::istream& in, std::ostream& out, const Options& options, bool fail_on_error, LayoutConfig layout) {
  Repl repl(layout);
  std::string line;
  for (;;) {
    if (options.prompt) out << "(emu) " << std::flush;
    if (!std::getline(in, line)) break;
    if (options.echo && line.find_first_not_of(" \t\r") != std::string::npos) out << "> " << line << '\n';
    if (!repl.execute(line, out)) break;
  }
  return fail_on_error && repl.error_count() > 0 ? 1 : 0;
}

}  // namespace rvwb::repl
