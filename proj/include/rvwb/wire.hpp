#pragma once

// Newline-delimited JSON protocol shared by the stdio server, the HTTP
// binding and the browser UI.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"
#include "rvwb/session.hpp"

namespace rvwb::wire {

using nlohmann::json;

/// Malformed or schema-violating message.
class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json to_json(const StateSnapshot& snapshot);
StateSnapshot snapshot_from_json(const json& j);

json to_json(const Command& command);
Command command_from_json(const json& j);

json to_json(const Response& response);
Response response_from_json(const json& j);

/// One request line in, one response line out (no trailing newline).
/// Malformed requests produce an error response rather than throwing.
std::string handle_message(Session& session, std::string_view line);

/// Reads requests line by line until EOF; blank lines are skipped.
void serve_stream(Session& session, std::istream& in, std::ostream& out);

}  // namespace rvwb::wire
