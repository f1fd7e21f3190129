#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"

#include "evsim/config.hpp"
#include "evsim/errors.hpp"
#include "evsim/eval.hpp"
#include "evsim/learner.hpp"
#include "evsim/policy.hpp"
#include "evsim/server.hpp"
#include "evsim/trips.hpp"

namespace fs = std::filesystem;
using namespace evsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

SimConfig resolve_config(std::string path,
                         const std::vector<std::string>& overrides) {
  if (path.empty()) {
    if (const char* env = std::getenv("EV_SIM_CONFIG")) path = env;
  }
  SimConfig cfg = path.empty() ? SimConfig{} : SimConfig::load(path);
  for (const auto& assignment : overrides) cfg.set_override(assignment);
  return cfg;
}

int run_ingest(const std::string& trips_path, const std::string& grid_path,
               const std::string& out_path) {
  if (!fs::exists(trips_path)) {
    std::cerr << "evsim ingest: no such file: " << trips_path << "\n";
    return kExitUsage;
  }
  ZoneGrid grid;
  if (!grid_path.empty()) {
    if (!fs::exists(grid_path)) {
      std::cerr << "evsim ingest: no such file: " << grid_path << "\n";
      return kExitUsage;
    }
    std::ifstream in(grid_path);
    nlohmann::json doc = nlohmann::json::parse(in);
    if (!doc.contains("grid")) doc = nlohmann::json{{"grid", doc}};
    grid = SimConfig::from_json(nlohmann::json{{"grid", doc.at("grid")}}).grid;
  }
  IngestStats stats;
  TripModel model = ingest_csv_file(trips_path, grid, &stats);
  save_model(model, out_path);
  std::cout << "read " << stats.total << " rows: stored " << stats.stored
            << ", dropped " << stats.dropped() << " (invalid "
            << stats.dropped_invalid << ", out_of_bounds "
            << stats.dropped_out_of_bounds << ", capacity "
            << stats.dropped_capacity << ")\n"
            << "model written to " << out_path << "\n";
  return kExitOk;
}

int run_train(SimConfig cfg, const std::string& out_path,
              const std::string& curve_path, bool verbose) {
  auto trips = cfg.build_trips();
  const EnvConfig env_cfg = cfg.build_env(trips);
  const EnvFactory factory = [env_cfg](int) { return Env(env_cfg); };

  const auto t0 = std::chrono::steady_clock::now();
  int updates = 0;
  auto progress = [&](int episodes_done, const UpdateDiag& diag) {
    ++updates;
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::fprintf(stderr,
                 "[train] update %d  episodes %d/%d  kl %.5f  gain %.5f%s  "
                 "(%.1fs)\n",
                 updates, episodes_done, cfg.learner.episodes, diag.kl,
                 diag.surrogate_gain, diag.reverted ? "  (reverted)" : "",
                 secs);
    if (verbose) {
      std::fprintf(stderr, "[train]   epochs %d  value loss %.4f -> %.4f\n",
                   diag.epochs_used, diag.value_loss_before,
                   diag.value_loss_after);
    }
  };

  TrainResult result = train(factory, cfg.learner, progress);
  save_checkpoint(result.nets, out_path);
  if (!curve_path.empty()) write_curve_csv(result.episode_rewards, curve_path);

  double mean_tail = 0;
  const std::size_t n = result.episode_rewards.size();
  const std::size_t tail = std::min<std::size_t>(n, 100);
  for (std::size_t i = n - tail; i < n; ++i)
    mean_tail += result.episode_rewards[i];
  if (tail > 0) mean_tail /= static_cast<double>(tail);
  std::cout << "trained " << n << " episodes (" << result.updates.size()
            << " updates); last-" << tail << " mean reward " << mean_tail
            << "\ncheckpoint written to " << out_path << "\n";
  if (!curve_path.empty())
    std::cout << "curve written to " << curve_path << "\n";
  return kExitOk;
}

int run_evaluate(SimConfig cfg, const std::string& policy_spec, int episodes,
                 std::uint64_t seed, int workers, const std::string& out_path) {
  const std::string description = make_policy(policy_spec)->describe();
  const EnvConfig env_cfg = cfg.build_env();
  auto rows = run_episodes(env_cfg, policy_spec, episodes, seed, workers);
  AggregateReport report = aggregate(rows);
  report.policy = description;
  save_report(report, out_path);
  std::cout << description << ": " << episodes << " episodes, reward mean "
            << format_double(report.reward_mean) << " std "
            << format_double(report.reward_std) << " min "
            << format_double(report.reward_min) << " max "
            << format_double(report.reward_max) << "\n";
  if (report.dollars_per_mile_defined) {
    std::cout << "energy cost per mile: $"
              << format_double(report.dollars_per_mile) << "\n";
  } else {
    std::cout << "energy cost per mile: undefined (zero ride miles)\n";
  }
  std::cout << "report written to " << out_path << "\n";
  return kExitOk;
}

int run_report(const std::string& in_path, const std::string& out_dir,
               int window) {
  const AggregateReport report = load_report(in_path);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_episodes_csv(report, (dir / "episodes.csv").string());
  write_histogram_csv(report, (dir / "histogram.csv").string());
  write_smoothed_rewards_csv(report, window, (dir / "rewards.csv").string());
  std::cout << "wrote " << (dir / "episodes.csv").string() << ", "
            << (dir / "histogram.csv").string() << ", "
            << (dir / "rewards.csv").string() << "\n";
  return kExitOk;
}

std::atomic<EnvServer*> g_server{nullptr};

void handle_signal(int) {
  if (EnvServer* server = g_server.load()) server->request_stop();
}

int run_serve(SimConfig cfg, int port, double idle_timeout) {
  ServerConfig scfg;
  scfg.port = port;
  scfg.idle_timeout_s = idle_timeout;
  scfg.sim = std::move(cfg);
  EnvServer server(scfg);
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  server.start();
  std::cout << "listening on port " << server.port() << std::endl;
  server.serve_forever();
  g_server = nullptr;
  std::cout << "server stopped after " << server.sessions_served()
            << " session(s)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-EV charge-vs-ride simulator"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "More progress detail on stderr");

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config_opts = [&](CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "Experiment config JSON (falls back to $EV_SIM_CONFIG)");
    sub->add_option("--set", overrides,
                    "Dotted-key config override, e.g. env.emissions_weight=0")
        ->take_all();
  };

  // ingest
  auto* ingest = app.add_subcommand(
      "ingest", "Build a trip model from a trip-record CSV");
  std::string trips_path, grid_path, model_out;
  ingest->add_option("--trips", trips_path, "Trip-record CSV")->required();
  ingest->add_option("--grid-config", grid_path,
                     "JSON with the zone grid (bare grid object or config "
                     "with a \"grid\" section)");
  ingest->add_option("--out", model_out, "Output model JSON")->required();

  // train
  auto* train_cmd =
      app.add_subcommand("train", "Train the policy-gradient agent");
  int train_episodes = -1, train_workers = -1;
  std::uint64_t train_seed = 0;
  std::string policy_out = "policy.json", curve_out;
  train_cmd->add_option("--episodes", train_episodes,
                        "Training episodes (overrides config)");
  auto* train_seed_opt =
      train_cmd->add_option("--seed", train_seed, "Seed (overrides config)");
  train_cmd->add_option("--workers", train_workers,
                        "Rollout workers (overrides config)");
  train_cmd->add_option("--out", policy_out, "Checkpoint output path")->capture_default_str();
  train_cmd->add_option("--curve", curve_out,
                        "Per-episode reward CSV output path");
  add_config_opts(train_cmd);

  // evaluate
  auto* eval_cmd = app.add_subcommand(
      "evaluate", "Run seeded episodes under a policy and aggregate");
  std::string policy_spec, report_out = "report.json";
  int eval_episodes = 100, eval_workers = 1;
  std::uint64_t eval_seed = 0;
  eval_cmd
      ->add_option("--policy", policy_spec,
                   "heuristic:<lambda> or a checkpoint path")
      ->required();
  eval_cmd->add_option("--episodes", eval_episodes, "Episode count")->capture_default_str();
  eval_cmd->add_option("--seed", eval_seed, "Base seed")->capture_default_str();
  eval_cmd->add_option("--workers", eval_workers, "Parallel workers")->capture_default_str();
  eval_cmd->add_option("--out", report_out, "Report JSON output path")->capture_default_str();
  add_config_opts(eval_cmd);

  // report
  auto* report_cmd =
      app.add_subcommand("report", "Export CSV tables from a report");
  std::string report_in, report_dir, report_format = "csv";
  int window = 10;
  report_cmd->add_option("--in", report_in, "Report JSON")->required();
  report_cmd->add_option("--format", report_format, "Output format")->capture_default_str()
      ->check(CLI::IsMember({"csv"}));
  report_cmd->add_option("--out", report_dir, "Output directory")->required();
  report_cmd->add_option("--window", window, "Smoothing window")->capture_default_str()
      ->check(CLI::PositiveNumber);

  // serve
  auto* serve_cmd =
      app.add_subcommand("serve", "Expose the environment over TCP");
  int port = kDefaultServerPort;
  double idle_timeout = 300.0;
  serve_cmd->add_option("--port", port, "TCP port (0 picks one)")->capture_default_str();
  serve_cmd->add_option("--idle-timeout", idle_timeout,
                        "Seconds before idle sessions are reaped")->capture_default_str();
  add_config_opts(serve_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the error
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (ingest->parsed()) return run_ingest(trips_path, grid_path, model_out);
    if (report_cmd->parsed()) return run_report(report_in, report_dir, window);
    SimConfig cfg = resolve_config(config_path, overrides);
    if (train_cmd->parsed()) {
      if (train_episodes >= 0) cfg.learner.episodes = train_episodes;
      if (train_workers >= 1) cfg.learner.workers = train_workers;
      if (!train_seed_opt->empty()) cfg.learner.seed = train_seed;
      return run_train(std::move(cfg), policy_out, curve_out, verbose);
    }
    if (eval_cmd->parsed()) {
      return run_evaluate(std::move(cfg), policy_spec, eval_episodes,
                          eval_seed, eval_workers, report_out);
    }
    if (serve_cmd->parsed())
      return run_serve(std::move(cfg), port, idle_timeout);
  } catch (const InvalidParamsError& e) {
    std::cerr << "evsim: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidConfigError& e) {
    std::cerr << "evsim: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "evsim: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
