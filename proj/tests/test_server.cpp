#include <doctest.h>

#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "rvwb/server.hpp"

using nlohmann::json;

TEST_CASE("registry keeps sessions apart") {
  rvwb::SessionRegistry registry;
  auto a = json::parse(registry.handle("a", R"({"cmd":"load","source":"addi a0, x0, 1\n"})"));
  CHECK(a["ok"] == true);
  auto b = json::parse(registry.handle("b", R"({"cmd":"get_state"})"));
  CHECK(b["ok"] == false);
  CHECK(b["error"] == "no program loaded");
  CHECK(registry.size() == 2);
}

TEST_CASE("HTTP binding") {
  rvwb::HttpServer server;
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen(); });

  httplib::Client client("127.0.0.1", port);
  auto post = [&](const std::string& id, const std::string& body) {
    auto res = client.Post("/session/" + id + "/command", body, "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    return json::parse(res->body);
  };

  auto r = post("s1", R"({"cmd":"load","source":"li a0, 42\n"})");
  CHECK(r["ok"] == true);
  r = post("s1", R"({"cmd":"run"})");
  CHECK(r["snapshot"]["halt"] == "exit");
  CHECK(r["snapshot"]["registers"][10] == 42);

  r = post("s2", R"({"cmd":"step"})");
  CHECK(r["ok"] == false);
  r = post("s2", "{broken");
  CHECK(r["ok"] == false);

  auto missing = client.Post("/nowhere", "{}", "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  server.stop();
  thread.join();
}
