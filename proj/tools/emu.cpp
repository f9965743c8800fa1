// emu: command-line front end for the RV32IM teaching emulator.
//
//   emu repl [--script FILE]                  interactive debugger (or batch replay)
//   emu run FILE [--max-steps N] [--break A]  assemble, run, print the final state
//   emu serve [--port P]                      JSON protocol on stdio, or HTTP when --port is given

#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "CLI11.hpp"
#include "rvwb/repl.hpp"
#include "rvwb/server.hpp"
#include "rvwb/session.hpp"
#include "rvwb/version.hpp"
#include "rvwb/wire.hpp"

namespace {

enum ExitCode { kOk = 0, kAssemblyError = 1, kUsage = 2, kAbnormalHalt = 3 };

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

int run_program(const std::string& path, std::uint64_t max_steps, const std::vector<std::string>& breaks,
                bool json, const std::string& radix_name) {
  auto source = read_file(path);
  if (!source) {
    std::cerr << "emu: cannot open '" << path << "'\n";
    return kUsage;
  }
  auto radix = rvwb::repl::parse_radix(radix_name);
  if (!radix) {
    std::cerr << "emu: unknown radix '" << radix_name << "'\n";
    return kUsage;
  }

  rvwb::Session session;
  auto response = session.handle(rvwb::command::Load{*source});
  if (!response.ok()) {
    if (json)
      std::cout << rvwb::wire::to_json(response).dump() << '\n';
    else
      std::cerr << path << ": " << response.error << '\n';
    return kAssemblyError;
  }

  for (const auto& b : breaks) {
    std::optional<rvwb::Word> address;
    if (auto value = rvwb::parse_integer(b); value && *value >= 0 && *value <= UINT32_MAX)
      address = static_cast<rvwb::Word>(*value);
    else if (auto it = session.program()->labels.find(b); it != session.program()->labels.end())
      address = it->second;
    if (!address) {
      std::cerr << "emu: unknown breakpoint '" << b << "'\n";
      return kUsage;
    }
    auto set = session.handle(rvwb::command::SetBreak{*address});
    if (!set.ok()) {
      std::cerr << "emu: " << set.error << '\n';
      return kUsage;
    }
  }

  response = session.handle(rvwb::command::Run{max_steps});
  const auto& snapshot = *response.snapshot;
  if (json) {
    std::cout << rvwb::wire::to_json(response).dump() << '\n';
  } else {
    std::cout << rvwb::repl::format_status(snapshot, *session.state());
    std::cout << rvwb::repl::format_registers(snapshot, *radix);
  }
  const bool abnormal = snapshot.halt == rvwb::Halt::fault || snapshot.halt == rvwb::Halt::step_limit;
  return abnormal ? kAbnormalHalt : kOk;
}

int serve(std::optional<int> port, const std::string& host) {
  if (!port) {
    rvwb::Session session;
    rvwb::wire::serve_stream(session, std::cin, std::cout);
    return kOk;
  }
  rvwb::HttpServer server;
  const int bound = server.bind(host, *port);
  if (bound < 0) {
    std::cerr << "emu: cannot bind " << host << ":" << *port << '\n';
    return kUsage;
  }
  std::cerr << fmt::format("listening on http://{}:{}/session/<id>/command\n", host, bound);
  return server.listen() ? kOk : kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RV32IM assembly workbench: assembler, emulator and debugger"};
  app.set_version_flag("--version", std::string("emu ") + rvwb::kVersion);
  app.require_subcommand(1);

  auto* repl = app.add_subcommand("repl", "interactive debugger");
  std::string script;
  bool echo = false;
  repl->add_option("--script", script, "replay commands from a file instead of stdin")->check(CLI::ExistingFile);
  repl->add_flag("--echo", echo, "echo each command before its output");

  auto* run = app.add_subcommand("run", "assemble and run a program to completion");
  std::string file;
  std::uint64_t max_steps = rvwb::kDefaultMaxSteps;
  std::vector<std::string> breaks;
  bool json = false;
  std::string radix = "hex";
  run->add_option("file", file, "assembly source")->required();
  run->add_option("--max-steps", max_steps, "step budget");
  run->add_option("--break", breaks, "breakpoint address or label (repeatable)");
  run->add_flag("--json", json, "print the final response as protocol JSON");
  run->add_option("--radix", radix, "register radix: hex, dec or bin");

  auto* serve_cmd = app.add_subcommand("serve", "serve the JSON session protocol");
  std::optional<int> port;
  std::string host = "127.0.0.1";
  serve_cmd->add_option("--port", port, "HTTP port; without it the protocol runs over stdin/stdout");
  serve_cmd->add_option("--host", host, "HTTP bind address");

  CLI11_PARSE(app, argc, argv);

  if (*repl) {
    if (!script.empty()) {
      std::ifstream in(script);
      return rvwb::repl::run(in, std::cout, {.prompt = false, .echo = echo}, true);
    }
    return rvwb::repl::run(std::cin, std::cout, {.prompt = isatty(STDIN_FILENO) != 0, .echo = echo});
  }
  if (*run) return run_program(file, max_steps, breaks, json, radix);
  return serve(port, host);
}
