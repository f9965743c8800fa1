#pragma once

// Text front end: renders snapshot fragments and drives a Session from a
// line-oriented command stream.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "rvwb/session.hpp"

namespace rvwb::repl {

enum class Radix { hex, dec, bin };

std::optional<Radix> parse_radix(std::string_view name);
std::string format_value(Word value, Radix radix);

/// 32 rows of "x5 (t0) = 0x00000007"; rows in changed_registers end in " *".
std::string format_registers(const StateSnapshot& snapshot, Radix radix);
std::string format_listing(const StateSnapshot& snapshot);
std::string format_memory(const MachineState& state, Word address, std::size_t count);
/// One-paragraph summary after step/run: halt status, pc, current line, changes.
std::string format_status(const StateSnapshot& snapshot, const MachineState& state);

struct Options {
  bool prompt = false;  // print "(emu) " before each command
  bool echo = false;    // echo each command, for transcripts of scripted runs
};

class Repl {
 public:
  explicit Repl(LayoutConfig layout = {}) : session_(layout) {}

  /// Executes one command line. Returns false on quit.
  bool execute(std::string_view line, std::ostream& out);

  std::size_t error_count() const { return errors_; }
  Session& session() { return session_; }

 private:
  std::optional<Word> resolve_address(std::string_view token) const;
  void report(const Response& response, std::ostream& out);

  Session session_;
  std::size_t errors_ = 0;
};

/// Runs until quit or end of input. Returns 0, or 1 when any command failed
/// and `fail_on_error` is set.
int run(std::istream& in, std::ostream& out, const Options& options = {}, bool fail_on_error = false,
        LayoutConfig layout = {});

}  // namespace rvwb::repl
