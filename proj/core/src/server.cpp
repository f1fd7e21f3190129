#include "evsim/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include <nlohmann/json.hpp>

#include "evsim/errors.hpp"

namespace evsim {

using nlohmann::json;

namespace {

std::string error_line(const char* code) {
  return json{{"ok", false}, {"error", code}}.dump();
}

json obs_to_json(const Observation& obs) {
  json arr = json::array();
  for (double v : obs.array()) arr.push_back(v);
  return arr;
}

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

Session::Session(std::uint64_t id, EnvConfig env_config)
    : id_(id), env_config_(std::move(env_config)) {}

std::string Session::handle_line(const std::string& line) {
  json req = json::parse(line, nullptr, false);
  if (req.is_discarded() || !req.is_object() || !req.contains("cmd") ||
      !req.at("cmd").is_string()) {
    return error_line("parse");
  }
  const std::string cmd = req.at("cmd").get<std::string>();

  if (cmd == "hello") {
    return json{{"ok", true},
                {"proto", kProtocolVersion},
                {"obs_dim", Observation::kDim},
                {"actions", 2}}
        .dump();
  }
  if (cmd == "reset") {
    std::uint64_t seed = env_config_.seed;
    if (req.contains("seed")) {
      if (!req.at("seed").is_number_integer() &&
          !req.at("seed").is_number_unsigned()) {
        return error_line("bad_request");
      }
      seed = req.at("seed").get<std::uint64_t>();
    }
    if (!env_) env_ = std::make_unique<Env>(env_config_);
    Observation obs = env_->reset(seed);
    episode_active_ = true;
    return json{{"ok", true}, {"obs", obs_to_json(obs)}}.dump();
  }
  if (cmd == "step") {
    if (!episode_active_) return error_line("no_episode");
    if (env_->done()) return error_line("finished");
    if (!req.contains("action") || !req.at("action").is_number_integer()) {
      return error_line("bad_action");
    }
    const int a = req.at("action").get<int>();
    if (a != 0 && a != 1) return error_line("bad_action");
    StepResult r = env_->step(static_cast<Action>(a));
    ++steps_;
    json info{{"branch", r.info.branch},
              {"cost_usd", r.info.cost_usd},
              {"emissions_kg", r.info.emissions_kg},
              {"fare_usd", r.info.fare_usd},
              {"elapsed_min", r.info.elapsed_min}};
    return json{{"ok", true},
                {"obs", obs_to_json(r.obs)},
                {"reward", r.reward},
                {"done", r.done},
                {"info", info}}
        .dump();
  }
  if (cmd == "close") {
    closed_ = true;
    return json{{"ok", true}}.dump();
  }
  return error_line("unknown_cmd");
}

EnvServer::EnvServer(ServerConfig config)
    : cfg_(std::move(config)), env_config_(cfg_.sim.build_env()) {}

EnvServer::~EnvServer() { stop(); }

void EnvServer::start() {
  if (running_) return;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw IoError("socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(static_cast<std::uint16_t>(cfg_.port));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
      0) {
    const int err = errno;
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw IoError("cannot bind port " + std::to_string(cfg_.port) + ": " +
                  std::strerror(err));
  }
  if (::listen(listen_fd_, 16) < 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw IoError("listen() failed");
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);

  stop_requested_ = false;
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void EnvServer::stop() {
  if (!running_) return;
  stop_requested_ = true;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  {
    std::lock_guard<std::mutex> lock(conns_mutex_);
    for (auto& conn : conns_) {
      int fd = conn->fd.load();
      if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
    }
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> threads;
  {
    std::lock_guard<std::mutex> lock(conns_mutex_);
    threads.swap(conn_threads_);
  }
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
  {
    std::lock_guard<std::mutex> lock(conns_mutex_);
    conns_.clear();
  }
  running_ = false;
}

void EnvServer::serve_forever() {
  start();
  while (!stop_requested_) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  stop();
}

void EnvServer::accept_loop() {
  while (!stop_requested_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 200);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0 || !(pfd.revents & POLLIN)) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    auto conn = std::make_shared<Conn>(fd);
    std::lock_guard<std::mutex> lock(conns_mutex_);
    conns_.push_back(conn);
    conn_threads_.emplace_back([this, conn] { connection_loop(conn); });
  }
}

void EnvServer::connection_loop(std::shared_ptr<Conn> conn) {
  Session session(next_session_id_.fetch_add(1) + 1, env_config_);
  std::string buffer;
  char chunk[4096];
  double last_activity = now_s();
  bool alive = true;

  while (alive && !stop_requested_ && !session.closed()) {
    const int fd = conn->fd.load();
    if (fd < 0) break;
    pollfd pfd{fd, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 200);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) {
      if (cfg_.idle_timeout_s > 0 &&
          now_s() - last_activity > cfg_.idle_timeout_s) {
        break;  // reap idle session
      }
      continue;
    }
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;  // disconnect or error: reap, keep server alive
    last_activity = now_s();
    buffer.append(chunk, static_cast<std::size_t>(n));

    std::size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::string response = session.handle_line(line);
      response.push_back('\n');
      std::size_t sent = 0;
      while (sent < response.size()) {
        const ssize_t w =
            ::send(fd, response.data() + sent, response.size() - sent,
                   MSG_NOSIGNAL);
        if (w <= 0) {
          alive = false;
          break;
        }
        sent += static_cast<std::size_t>(w);
      }
      if (!alive || session.closed()) break;
    }
  }

  std::lock_guard<std::mutex> lock(conns_mutex_);
  const int fd = conn->fd.exchange(-1);
  if (fd >= 0) ::close(fd);
}

}  // namespace evsim
