#pragma once

#include <random>
#include <string>

#include "oracle.hpp"
#include "rvwb/session.hpp"

namespace fixtures {

/// Drives `session` to an arbitrary reachable state: random program, maybe
/// some data, breakpoints, a few steps or a run. Returns the final response.
inline rvwb::Response random_session(std::mt19937& rng, rvwb::Session& session) {
  std::string source;
  if (rng() % 2) source += ".data\nbuf: .word 1, -2, 0x7fffffff\nmsg: .string \"hi\\n\"\n.text\n";
  source += "main:\n";
  for (const auto& in : oracle::random_program(rng, 1 + rng() % 30, 3, 256)) source += "  " + oracle::to_asm(in) + "\n";
  if (rng() % 3 == 0) source += "  sw x5, -4(sp)\n";
  if (rng() % 4 == 0) source += "  lw x6, 1(gp)\n";  // misaligned: ends in a fault

  auto response = session.handle(rvwb::command::Load{source});
  if (!response.ok()) return response;
  const auto& text = session.program()->text_image;
  for (int b = static_cast<int>(rng() % 3); b > 0; --b)
    session.handle(rvwb::command::SetBreak{text[rng() % text.size()].address});

  switch (rng() % 4) {
    case 0: break;
    case 1: response = session.handle(rvwb::command::Step{static_cast<std::int64_t>(1 + rng() % 10)}); break;
    case 2: response = session.handle(rvwb::command::Run{}); break;
    default: response = session.handle(rvwb::command::Run{1 + rng() % 20}); break;
  }
  if (!response.ok()) response = session.handle(rvwb::command::GetState{});
  return response;
}

}  // namespace fixtures
