#include <doctest.h>

#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "rvwb/wire.hpp"

using namespace rvwb;
using wire::json;

namespace {

std::set<std::string> keys(const json& j) {
  std::set<std::string> out;
  for (const auto& [k, v] : j.items()) out.insert(k);
  return out;
}

StateSnapshot loaded_snapshot(std::string_view source) {
  Session session;
  auto r = session.handle(command::Load{std::string(source)});
  REQUIRE(r.ok());
  return *r.snapshot;
}

}  // namespace

TEST_CASE("snapshot field names") {
  const auto j = wire::to_json(loaded_snapshot(".data\n.word 5\n.text\nadd a0, a0, a0\n"));
  CHECK(keys(j) == std::set<std::string>{"pc", "registers", "changed_registers", "listing", "current_breakdown",
                                         "memory_regions", "halt", "step_count", "breakpoints"});
  CHECK(j["registers"].size() == 32);
  CHECK(j["halt"] == "running");
  CHECK(keys(j["listing"][0]) == std::set<std::string>{"address", "text", "kind", "is_kernel", "is_current",
                                                       "has_breakpoint", "line", "is_label"});
  CHECK(keys(j["current_breakdown"][0]) == std::set<std::string>{"hi", "lo", "name", "bits"});
  for (const auto& r : j["memory_regions"]) CHECK(keys(r) == std::set<std::string>{"name", "start", "end", "words"});
  const auto& text = j["memory_regions"][4];
  CHECK(text["name"] == "text");
  CHECK(keys(text["words"][0]) == std::set<std::string>{"address", "value", "comment"});
  const auto& data = j["memory_regions"][3];
  CHECK(keys(data["words"][0]) == std::set<std::string>{"address", "value"});

  // the .text directive in the kernel suffix has no address
  bool saw_null = false;
  for (const auto& l : j["listing"]) saw_null |= l["address"].is_null();
  CHECK(saw_null);
}

TEST_CASE("fault snapshot without a breakdown serializes null") {
  StateSnapshot s = loaded_snapshot("nop");
  s.current_breakdown.reset();
  const auto j = wire::to_json(s);
  CHECK(j["current_breakdown"].is_null());
  CHECK(wire::snapshot_from_json(j) == s);
}

TEST_CASE("snapshot round trip over random sessions") {
  std::mt19937 rng(2024);
  for (int i = 0; i < 100; ++i) {
    Session session;
    const auto r = fixtures::random_session(rng, session);
    REQUIRE(r.ok());
    const auto text = wire::to_json(r).dump();
    const auto back = wire::response_from_json(json::parse(text));
    REQUIRE(back == r);
  }
}

TEST_CASE("commands round trip") {
  const std::vector<Command> commands = {command::Load{"nop\n"}, command::Step{3},        command::Run{77},
                                         command::SetBreak{16},  command::ClearBreak{20}, command::Reset{},
                                         command::GetState{}};
  for (const auto& c : commands) {
    const auto j = wire::to_json(c);
    CHECK(wire::to_json(wire::command_from_json(j)) == j);
  }
  CHECK(wire::to_json(command::Step{2}) == json::parse(R"({"cmd":"step","count":2})"));

  const auto step = wire::command_from_json(json::parse(R"({"cmd":"step"})"));
  CHECK(std::get<command::Step>(step).count == 1);
  const auto run = wire::command_from_json(json::parse(R"({"cmd":"run"})"));
  CHECK(std::get<command::Run>(run).max_steps == kDefaultMaxSteps);
}

TEST_CASE("error responses") {
  const auto r = Response::failure("bad", 3);
  const auto j = wire::to_json(r);
  CHECK(j == json::parse(R"({"ok":false,"error":"bad","line":3})"));
  CHECK(wire::response_from_json(j) == r);
  CHECK_FALSE(wire::to_json(Response::failure("x")).contains("line"));
}

TEST_CASE("malformed messages get error responses") {
  Session session;
  for (const char* text : {"not json", "[]", R"({"cmd":"jump"})", R"({"source":"nop"})", R"({"cmd":"load"})",
                           R"({"cmd":"set_break","address":-4})", R"({"cmd":"set_break","address":"16"})",
                           R"({"cmd":"step","count":"2"})", R"({"cmd":"run","max_steps":-1})"}) {
    const auto reply = json::parse(wire::handle_message(session, text));
    CHECK_MESSAGE(reply["ok"] == false, text);
    CHECK(reply["error"].is_string());
  }
  CHECK_THROWS_AS(wire::snapshot_from_json(json::parse(R"({"pc":0})")), wire::WireError);
}

TEST_CASE("stdio stream protocol") {
  Session session;
  std::istringstream in(R"({"cmd":"load","source":"addi a0, x0, 5\n"})"
                        "\n\n"
                        R"({"cmd":"run"})"
                        "\n"
                        R"({"cmd":"step"})"
                        "\n"
                        R"({"cmd":"load","source":"oops\n"})"
                        "\n");
  std::ostringstream out;
  wire::serve_stream(session, in, out);
  std::istringstream lines(out.str());
  std::vector<json> replies;
  for (std::string line; std::getline(lines, line);) replies.push_back(json::parse(line));
  REQUIRE(replies.size() == 4);
  CHECK(replies[0]["ok"] == true);
  CHECK(replies[1]["snapshot"]["halt"] == "exit");
  CHECK(replies[1]["snapshot"]["registers"][10] == 5);
  CHECK(replies[2]["error"] == "halted: exit");
  CHECK(replies[3]["line"] == 1);
}
