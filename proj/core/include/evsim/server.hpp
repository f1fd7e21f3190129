#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "evsim/config.hpp"
#include "evsim/env.hpp"

namespace evsim {

constexpr int kProtocolVersion = 1;
constexpr int kDefaultServerPort = 7788;

// Per-connection protocol state: exactly one env per session.
class Session {
 public:
  Session(std::uint64_t id, EnvConfig env_config);

  // One JSON request line in, one JSON response line out (no newline).
  // Never throws on client input; protocol errors come back as
  // {"ok":false,"error":...} and the session stays usable.
  std::string handle_line(const std::string& line);

  std::uint64_t id() const { return id_; }
  std::uint64_t steps() const { return steps_; }
  bool closed() const { return closed_; }

 private:
  std::uint64_t id_;
  EnvConfig env_config_;
  std::unique_ptr<Env> env_;
  bool episode_active_ = false;
  bool closed_ = false;
  std::uint64_t steps_ = 0;
};

struct ServerConfig {
  int port = kDefaultServerPort;  // 0 picks an ephemeral port
  double idle_timeout_s = 300.0;
  SimConfig sim;
};

// Line-oriented TCP front end for the environment. One session per
// connection, handled sequentially; connections are isolated.
class EnvServer {
 public:
  explicit EnvServer(ServerConfig config);
  ~EnvServer();

  EnvServer(const EnvServer&) = delete;
  EnvServer& operator=(const EnvServer&) = delete;

  // Binds and starts the accept loop. Throws IoError if the port is taken.
  void start();

  // Closes the listener and every live connection, then joins all threads.
  void stop();

  // start() + block until request_stop() is called from elsewhere
  // (e.g. a signal handler).
  void serve_forever();
  void request_stop() { stop_requested_ = true; }

  int port() const { return port_; }
  std::uint64_t sessions_served() const { return next_session_id_.load(); }

 private:
  struct Conn {
    std::atomic<int> fd;
    explicit Conn(int f) : fd(f) {}
  };

  void accept_loop();
  void connection_loop(std::shared_ptr<Conn> conn);

  ServerConfig cfg_;
  EnvConfig env_config_;
  int listen_fd_ = -1;
  int port_ = 0;
  bool running_ = false;
  std::atomic<bool> stop_requested_{false};
  std::atomic<std::uint64_t> next_session_id_{0};
  std::thread accept_thread_;
  std::mutex conns_mutex_;
  std::vector<std::shared_ptr<Conn>> conns_;
  std::vector<std::thread> conn_threads_;
};

}  // namespace evsim
