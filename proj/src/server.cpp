#include "rvwb/server.hpp"

#include "httplib.h"
#include "rvwb/wire.hpp"

namespace rvwb {

SessionRegistry::Entry& SessionRegistry::entry(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  auto& slot = sessions_[session_id];
  if (!slot) slot = std::make_unique<Entry>(layout_);
  return *slot;
}

std::string SessionRegistry::handle(const std::string& session_id, const std::string& body) {
  auto& e = entry(session_id);
  std::lock_guard lock(e.mutex);
  return wire::handle_message(e.session, body);
}

std::size_t SessionRegistry::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

HttpServer::HttpServer(LayoutConfig layout) : registry_(layout), server_(std::make_unique<httplib::Server>()) {
  server_->Post(R"(/session/([A-Za-z0-9_.-]+)/command)", [this](const httplib::Request& req, httplib::Response& res) {
    res.set_content(registry_.handle(req.matches[1], req.body), "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

}  // namespace rvwb
