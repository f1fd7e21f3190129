#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"

#include <nlohmann/json.hpp>

#include "evsim/config.hpp"
#include "evsim/env.hpp"
#include "evsim/errors.hpp"
#include "evsim/server.hpp"

using namespace evsim;
using nlohmann::json;

namespace {

SimConfig short_sim() {
  SimConfig sim;
  sim.horizon_min = 360.0;
  return sim;
}

json ask(Session& session, const json& req) {
  return json::parse(session.handle_line(req.dump()));
}

// Minimal blocking line client for the socket tests.
struct LineClient {
  int fd = -1;
  std::string buffer;

  explicit LineClient(int port) {
    fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) ==
            0);
  }
  ~LineClient() { close(); }
  LineClient(const LineClient&) = delete;
  LineClient& operator=(const LineClient&) = delete;

  void close() {
    if (fd >= 0) {
      ::close(fd);
      fd = -1;
    }
  }

  void send_line(const std::string& line) {
    std::string out = line + "\n";
    std::size_t sent = 0;
    while (sent < out.size()) {
      const ssize_t n = ::send(fd, out.data() + sent, out.size() - sent, 0);
      REQUIRE(n > 0);
      sent += static_cast<std::size_t>(n);
    }
  }

  // Empty return means the server closed the connection.
  std::string recv_line() {
    while (true) {
      const auto pos = buffer.find('\n');
      if (pos != std::string::npos) {
        std::string line = buffer.substr(0, pos);
        buffer.erase(0, pos + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
      if (n <= 0) return "";
      buffer.append(chunk, static_cast<std::size_t>(n));
    }
  }

  json ask(const json& req) {
    send_line(req.dump());
    const std::string line = recv_line();
    REQUIRE(!line.empty());
    return json::parse(line);
  }
};

}  // namespace

TEST_CASE("hello reports the protocol contract") {
  Session session(1, short_sim().build_env());
  const json r = ask(session, {{"cmd", "hello"}});
  CHECK(r.at("ok") == true);
  CHECK(r.at("proto") == kProtocolVersion);
  CHECK(r.at("obs_dim") == 7);
  CHECK(r.at("actions") == 2);
}

TEST_CASE("protocol errors keep the session usable") {
  Session session(1, short_sim().build_env());

  json r = ask(session, {{"cmd", "step"}, {"action", 1}});
  CHECK(r.at("ok") == false);
  CHECK(r.at("error") == "no_episode");

  r = json::parse(session.handle_line("{nope"));
  CHECK(r.at("error") == "parse");
  r = json::parse(session.handle_line("[1,2,3]"));
  CHECK(r.at("error") == "parse");
  r = json::parse(session.handle_line(R"({"cmd": 5})"));
  CHECK(r.at("error") == "parse");

  r = ask(session, {{"cmd", "warp"}});
  CHECK(r.at("error") == "unknown_cmd");

  r = ask(session, {{"cmd", "reset"}, {"seed", "abc"}});
  CHECK(r.at("error") == "bad_request");

  // after all that, a normal reset still works
  r = ask(session, {{"cmd", "reset"}, {"seed", 3}});
  CHECK(r.at("ok") == true);
  REQUIRE(r.at("obs").is_array());
  CHECK(r.at("obs").size() == 7);
  CHECK(r.at("obs").at(0) == 1.0);  // full battery at reset
}

TEST_CASE("step validates the action field") {
  Session session(1, short_sim().build_env());
  ask(session, {{"cmd", "reset"}, {"seed", 1}});

  CHECK(ask(session, {{"cmd", "step"}}).at("error") == "bad_action");
  CHECK(ask(session, {{"cmd", "step"}, {"action", 2}}).at("error") ==
        "bad_action");
  CHECK(ask(session, {{"cmd", "step"}, {"action", -1}}).at("error") ==
        "bad_action");
  CHECK(ask(session, {{"cmd", "step"}, {"action", 0.5}}).at("error") ==
        "bad_action");

  const json r = ask(session, {{"cmd", "step"}, {"action", 1}});
  CHECK(r.at("ok") == true);
  CHECK(r.at("obs").size() == 7);
  CHECK(r.at("reward").is_number());
  CHECK(r.at("done").is_boolean());
  const std::string branch = r.at("info").at("branch");
  CHECK((branch == "ride" || branch == "charge" || branch == "forced_charge"));
  CHECK(r.at("info").at("elapsed_min").get<double>() > 0.0);
}

TEST_CASE("a finished episode refuses further steps until reset") {
  Session session(1, short_sim().build_env());
  ask(session, {{"cmd", "reset"}, {"seed", 2}});
  json r;
  do {
    r = ask(session, {{"cmd", "step"}, {"action", 1}});
    REQUIRE(r.at("ok") == true);
  } while (!r.at("done").get<bool>());

  r = ask(session, {{"cmd", "step"}, {"action", 1}});
  CHECK(r.at("error") == "finished");

  r = ask(session, {{"cmd", "reset"}, {"seed", 2}});
  CHECK(r.at("ok") == true);
  r = ask(session, {{"cmd", "step"}, {"action", 1}});
  CHECK(r.at("ok") == true);
}

TEST_CASE("close acknowledges and marks the session") {
  Session session(7, short_sim().build_env());
  CHECK(session.id() == 7);
  const json r = ask(session, {{"cmd", "close"}});
  CHECK(r.at("ok") == true);
  CHECK(session.closed());
}

TEST_CASE("a remote episode reproduces the in-process one exactly") {
  const SimConfig sim = short_sim();
  const EnvConfig cfg = sim.build_env();
  Session session(1, cfg);
  Env local(cfg);

  json r = ask(session, {{"cmd", "reset"}, {"seed", 77}});
  Observation obs = local.reset(77);
  auto check_obs = [&](const json& remote, const Observation& want) {
    const auto arr = want.array();
    for (int i = 0; i < Observation::kDim; ++i) {
      CHECK(std::abs(remote.at(i).get<double>() - arr[i]) <= 1e-12);
    }
  };
  check_obs(r.at("obs"), obs);

  std::uint64_t steps = 0;
  while (!local.done()) {
    const int action = obs.battery_frac < 0.25 ? 0 : 1;
    r = ask(session, {{"cmd", "step"}, {"action", action}});
    REQUIRE(r.at("ok") == true);
    const StepResult sr = local.step(static_cast<Action>(action));
    CHECK(std::abs(r.at("reward").get<double>() - sr.reward) <= 1e-12);
    CHECK(r.at("done").get<bool>() == sr.done);
    CHECK(r.at("info").at("branch") == sr.info.branch);
    check_obs(r.at("obs"), sr.obs);
    obs = sr.obs;
    ++steps;
  }
  CHECK(steps == session.steps());
}

TEST_CASE("server binds an ephemeral port and serves hello") {
  ServerConfig cfg;
  cfg.port = 0;
  cfg.sim = short_sim();
  EnvServer server(cfg);
  server.start();
  REQUIRE(server.port() > 0);

  LineClient client(server.port());
  const json r = client.ask({{"cmd", "hello"}});
  CHECK(r.at("ok") == true);
  CHECK(r.at("proto") == 1);
  client.close();
  server.stop();
  CHECK(server.sessions_served() == 1);
}

TEST_CASE("concurrent sessions with one seed see identical transcripts") {
  ServerConfig cfg;
  cfg.port = 0;
  cfg.sim = short_sim();
  EnvServer server(cfg);
  server.start();

  LineClient a(server.port());
  LineClient b(server.port());
  const json reset{{"cmd", "reset"}, {"seed", 5}};
  a.send_line(reset.dump());
  b.send_line(reset.dump());
  CHECK(a.recv_line() == b.recv_line());

  bool done = false;
  while (!done) {
    const json step{{"cmd", "step"}, {"action", 1}};
    a.send_line(step.dump());
    b.send_line(step.dump());
    const std::string ra = a.recv_line();
    const std::string rb = b.recv_line();
    REQUIRE(!ra.empty());
    CHECK(ra == rb);
    done = json::parse(ra).at("done").get<bool>();
  }
  server.stop();
}

TEST_CASE("an abrupt disconnect does not poison later sessions") {
  ServerConfig cfg;
  cfg.port = 0;
  cfg.sim = short_sim();
  EnvServer server(cfg);
  server.start();

  {
    LineClient dropper(server.port());
    dropper.ask({{"cmd", "reset"}, {"seed", 1}});
    dropper.ask({{"cmd", "step"}, {"action", 1}});
  }  // socket closed mid-episode, no "close" command

  LineClient survivor(server.port());
  const json r = survivor.ask({{"cmd", "reset"}, {"seed", 1}});
  CHECK(r.at("ok") == true);
  server.stop();
}

TEST_CASE("a taken port raises IoError") {
  ServerConfig cfg;
  cfg.port = 0;
  cfg.sim = short_sim();
  EnvServer first(cfg);
  first.start();

  ServerConfig clash = cfg;
  clash.port = first.port();
  EnvServer second(clash);
  CHECK_THROWS_AS(second.start(), IoError);
  first.stop();
}

TEST_CASE("idle sessions are reaped after the timeout") {
  ServerConfig cfg;
  cfg.port = 0;
  cfg.idle_timeout_s = 0.3;
  cfg.sim = short_sim();
  EnvServer server(cfg);
  server.start();

  LineClient client(server.port());
  CHECK(client.ask({{"cmd", "hello"}}).at("ok") == true);
  std::this_thread::sleep_for(std::chrono::milliseconds(900));
  CHECK(client.recv_line().empty());  // server hung up
  server.stop();
}

TEST_CASE("stopping the server hangs up active connections") {
  ServerConfig cfg;
  cfg.port = 0;
  cfg.sim = short_sim();
  EnvServer server(cfg);
  server.start();

  LineClient client(server.port());
  client.ask({{"cmd", "reset"}, {"seed", 4}});
  server.stop();
  CHECK(client.recv_line().empty());
}
