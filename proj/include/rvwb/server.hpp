#pragma once

// Local HTTP binding for the session protocol:
//   POST /session/{id}/command   body: one command object, reply: one response object
// Sessions are created on first use and live until the server stops.

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "rvwb/session.hpp"

namespace httplib {
class Server;
}

namespace rvwb {

class SessionRegistry {
 public:
  explicit SessionRegistry(LayoutConfig layout = {}) : layout_(layout) {}

  /// Runs one serialized message against the named session.
  std::string handle(const std::string& session_id, const std::string& body);
  std::size_t size() const;

 private:
  struct Entry {
    std::mutex mutex;
    Session session;
    explicit Entry(LayoutConfig layout) : session(layout) {}
  };

  Entry& entry(const std::string& session_id);

  LayoutConfig layout_;
  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<Entry>> sessions_;
};

class HttpServer {
 public:
  explicit HttpServer(LayoutConfig layout = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to host:port (port 0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  bool listen();
  void stop();

  SessionRegistry& registry() { return registry_; }

 private:
  SessionRegistry registry_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace rvwb
