#include "rvwb/wire.hpp"

#include <fmt/format.h>

#include <istream>
#include <ostream>

namespace rvwb::wire {

namespace {

const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw WireError(fmt::format("missing field '{}'", name));
  return *it;
}

template <typename T>
T unsigned_field(const json& j, const char* name, std::uint64_t max) {
  const auto& v = field(j, name);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw WireError(fmt::format("field '{}' must be a non-negative integer", name));
  const auto value = v.get<std::uint64_t>();
  if (value > max) throw WireError(fmt::format("field '{}' out of range", name));
  return static_cast<T>(value);
}

Word word_field(const json& j, const char* name) { return unsigned_field<Word>(j, name, UINT32_MAX); }

bool bool_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_boolean()) throw WireError(fmt::format("field '{}' must be a boolean", name));
  return v.get<bool>();
}

std::string string_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) throw WireError(fmt::format("field '{}' must be a string", name));
  return v.get<std::string>();
}

const json& array_field(const json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_array()) throw WireError(fmt::format("field '{}' must be an array", name));
  return v;
}

void require_object(const json& j, std::string_view what) {
  if (!j.is_object()) throw WireError(fmt::format("{} must be a JSON object", what));
}

std::optional<ItemKind> kind_from_string(std::string_view name) {
  for (auto k : {ItemKind::instruction, ItemKind::label, ItemKind::pseudo, ItemKind::directive, ItemKind::error})
    if (name == to_string(k)) return k;
  return std::nullopt;
}

}  // namespace

json to_json(const StateSnapshot& s) {
  json listing = json::array();
  for (const auto& line : s.listing) {
    listing.push_back({
        {"address", line.address ? json(*line.address) : json(nullptr)},
        {"text", line.text},
        {"kind", to_string(line.kind)},
        {"is_kernel", line.is_kernel},
        {"is_current", line.is_current},
        {"has_breakpoint", line.has_breakpoint},
        {"line", line.line},
        {"is_label", line.is_label},
    });
  }

  json breakdown = nullptr;
  if (s.current_breakdown) {
    breakdown = json::array();
    for (const auto& seg : *s.current_breakdown)
      breakdown.push_back({{"hi", seg.hi_bit}, {"lo", seg.lo_bit}, {"name", seg.field_name}, {"bits", seg.bits}});
  }

  json regions = json::array();
  for (const auto& region : s.memory_regions) {
    json words = json::array();
    for (const auto& w : region.words) {
      json entry = {{"address", w.address}, {"value", w.value}};
      if (w.comment) entry["comment"] = *w.comment;
      words.push_back(std::move(entry));
    }
    regions.push_back({{"name", to_string(region.name)},
                       {"start", region.start},
                       {"end", region.end},
                       {"words", std::move(words)}});
  }

  json changed = json::array();
  for (auto r : s.changed_registers) changed.push_back(r.value());

  return {
      {"pc", s.pc},
      {"registers", s.registers},
      {"changed_registers", std::move(changed)},
      {"listing", std::move(listing)},
      {"current_breakdown", std::move(breakdown)},
      {"memory_regions", std::move(regions)},
      {"halt", to_string(s.halt)},
      {"step_count", s.step_count},
      {"breakpoints", s.breakpoints},
  };
}

StateSnapshot snapshot_from_json(const json& j) {
  require_object(j, "snapshot");
  StateSnapshot s;
  s.pc = word_field(j, "pc");

  const auto& regs = array_field(j, "registers");
  if (regs.size() != 32) throw WireError("registers must hold exactly 32 values");
  for (std::size_t i = 0; i < 32; ++i) {
    if (!regs[i].is_number_unsigned() || regs[i].get<std::uint64_t>() > UINT32_MAX)
      throw WireError("register values must be unsigned 32-bit integers");
    s.registers[i] = regs[i].get<Word>();
  }

  for (const auto& r : array_field(j, "changed_registers")) {
    if (!r.is_number_unsigned() || r.get<std::uint64_t>() > 31) throw WireError("bad changed_registers entry");
    s.changed_registers.emplace_back(r.get<unsigned>());
  }

  for (const auto& l : array_field(j, "listing")) {
    require_object(l, "listing entry");
    ListingLine line;
    const auto& address = field(l, "address");
    if (!address.is_null()) line.address = word_field(l, "address");
    line.text = string_field(l, "text");
    auto kind = kind_from_string(string_field(l, "kind"));
    if (!kind) throw WireError("unknown listing kind");
    line.kind = *kind;
    line.is_kernel = bool_field(l, "is_kernel");
    line.is_current = bool_field(l, "is_current");
    line.has_breakpoint = bool_field(l, "has_breakpoint");
    line.line = unsigned_field<int>(l, "line", INT32_MAX);
    line.is_label = bool_field(l, "is_label");
    s.listing.push_back(std::move(line));
  }

  const auto& breakdown = field(j, "current_breakdown");
  if (!breakdown.is_null()) {
    if (!breakdown.is_array()) throw WireError("current_breakdown must be an array or null");
    FieldBreakdown segments;
    for (const auto& seg : breakdown) {
      require_object(seg, "breakdown segment");
      segments.push_back({unsigned_field<int>(seg, "hi", 31), unsigned_field<int>(seg, "lo", 31),
                          string_field(seg, "name"), string_field(seg, "bits")});
    }
    s.current_breakdown = std::move(segments);
  }

  for (const auto& r : array_field(j, "memory_regions")) {
    require_object(r, "memory region");
    auto name = region_from_string(string_field(r, "name"));
    if (!name) throw WireError("unknown region name");
    MemoryRegion region{*name, word_field(r, "start"), unsigned_field<std::uint64_t>(r, "end", 1ull << 32), {}};
    for (const auto& w : array_field(r, "words")) {
      require_object(w, "memory word");
      MemoryWord word{word_field(w, "address"), word_field(w, "value"), std::nullopt};
      if (w.contains("comment")) word.comment = string_field(w, "comment");
      region.words.push_back(std::move(word));
    }
    s.memory_regions.push_back(std::move(region));
  }

  auto halt = halt_from_string(string_field(j, "halt"));
  if (!halt) throw WireError("unknown halt status");
  s.halt = *halt;
  s.step_count = unsigned_field<std::uint64_t>(j, "step_count", UINT64_MAX);
  for (const auto& b : array_field(j, "breakpoints")) {
    if (!b.is_number_unsigned() || b.get<std::uint64_t>() > UINT32_MAX) throw WireError("bad breakpoint address");
    s.breakpoints.push_back(b.get<Word>());
  }
  return s;
}

json to_json(const Command& command) {
  return std::visit(
      [](const auto& cmd) -> json {
        using T = std::decay_t<decltype(cmd)>;
        if constexpr (std::is_same_v<T, command::Load>) return {{"cmd", "load"}, {"source", cmd.source}};
        if constexpr (std::is_same_v<T, command::Step>) return {{"cmd", "step"}, {"count", cmd.count}};
        if constexpr (std::is_same_v<T, command::Run>) return {{"cmd", "run"}, {"max_steps", cmd.max_steps}};
        if constexpr (std::is_same_v<T, command::SetBreak>) return {{"cmd", "set_break"}, {"address", cmd.address}};
        if constexpr (std::is_same_v<T, command::ClearBreak>)
          return {{"cmd", "clear_break"}, {"address", cmd.address}};
        if constexpr (std::is_same_v<T, command::Reset>) return {{"cmd", "reset"}};
        if constexpr (std::is_same_v<T, command::GetState>) return {{"cmd", "get_state"}};
      },
      command);
}

Command command_from_json(const json& j) {
  require_object(j, "command");
  const std::string name = string_field(j, "cmd");
  if (name == "load") return command::Load{string_field(j, "source")};
  if (name == "step") {
    command::Step step;
    if (j.contains("count")) {
      const auto& v = j["count"];
      if (!v.is_number_integer()) throw WireError("field 'count' must be an integer");
      step.count = v.get<std::int64_t>();
    }
    return step;
  }
  if (name == "run") {
    command::Run run;
    if (j.contains("max_steps")) run.max_steps = unsigned_field<std::uint64_t>(j, "max_steps", UINT64_MAX);
    return run;
  }
  if (name == "set_break") return command::SetBreak{word_field(j, "address")};
  if (name == "clear_break") return command::ClearBreak{word_field(j, "address")};
  if (name == "reset") return command::Reset{};
  if (name == "get_state") return command::GetState{};
  throw WireError(fmt::format("unknown command '{}'", name));
}

json to_json(const Response& response) {
  if (response.ok()) return {{"ok", true}, {"snapshot", to_json(*response.snapshot)}};
  json j = {{"ok", false}, {"error", response.error}};
  if (response.line) j["line"] = *response.line;
  return j;
}

Response response_from_json(const json& j) {
  require_object(j, "response");
  if (bool_field(j, "ok")) return Response::success(snapshot_from_json(field(j, "snapshot")));
  std::optional<int> line;
  if (j.contains("line")) line = unsigned_field<int>(j, "line", INT32_MAX);
  return Response::failure(string_field(j, "error"), line);
}

std::string handle_message(Session& session, std::string_view line) {
  Response response;
  try {
    response = session.handle(command_from_json(json::parse(line)));
  } catch (const json::exception& e) {
    response = Response::failure(fmt::format("malformed message: {}", e.what()));
  } catch (const WireError& e) {
    response = Response::failure(fmt::format("malformed message: {}", e.what()));
  }
  return to_json(response).dump();
}

void serve_stream(Session& session, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << handle_message(session, line) << '\n' << std::flush;
  }
}

}  // namespace rvwb::wire
