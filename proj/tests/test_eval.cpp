#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#include <nlohmann/json.hpp>

#include "evsim/env.hpp"
#include "evsim/errors.hpp"
#include "evsim/eval.hpp"
#include "evsim/policy.hpp"
#include "evsim/trips.hpp"

using namespace evsim;
namespace fs = std::filesystem;

namespace {

struct AlwaysCharge final : Policy {
  Action act(const Observation&, Rng&) override { return Action::Charge; }
  std::string describe() const override { return "always-charge"; }
};

EnvConfig day_config(std::uint64_t seed) {
  EnvConfig cfg;
  cfg.seed = seed;
  cfg.horizon_min = 1440.0;
  cfg.trips = std::make_shared<TripModel>(
      synthetic_model(cfg.grid, SyntheticParams{}, cfg.speeds));
  return cfg;
}

EpisodeMetrics fake_metrics(std::uint64_t seed, double reward, double cost,
                            double miles) {
  EpisodeMetrics m;
  m.seed = seed;
  m.total_reward = reward;
  m.energy_cost_usd = cost;
  m.miles = miles;
  return m;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("evsim_eval_" + name);
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

bool same_metrics(const EpisodeMetrics& a, const EpisodeMetrics& b) {
  if (a.seed != b.seed || a.total_reward != b.total_reward ||
      a.revenue_usd != b.revenue_usd ||
      a.energy_cost_usd != b.energy_cost_usd ||
      a.emissions_kg != b.emissions_kg || a.miles != b.miles ||
      a.rides_completed != b.rides_completed ||
      a.infeasible_events != b.infeasible_events || a.steps != b.steps ||
      a.final_clock_min != b.final_clock_min ||
      a.charge_events.size() != b.charge_events.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.charge_events.size(); ++i) {
    const auto& x = a.charge_events[i];
    const auto& y = b.charge_events[i];
    if (x.decision_min != y.decision_min || x.energy_kwh != y.energy_kwh ||
        x.cost_usd != y.cost_usd || x.forced != y.forced) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("a policy that never rides leaves dollars-per-mile undefined") {
  const EnvConfig cfg = day_config(11);
  AlwaysCharge policy;
  const EpisodeMetrics m = run_episode(cfg, policy, 11);
  CHECK(m.rides_completed == 0);
  CHECK(m.miles == 0.0);
  CHECK(m.revenue_usd == 0.0);
  CHECK(!m.charge_events.empty());

  const AggregateReport rep = aggregate({m});
  CHECK(!rep.dollars_per_mile_defined);
  CHECK(rep.dollars_per_mile == 0.0);
}

TEST_CASE("dollars per mile pools costs and miles across episodes") {
  std::vector<EpisodeMetrics> rows;
  rows.push_back(fake_metrics(0, 5.0, 1.0, 10.0));
  rows.push_back(fake_metrics(1, 7.0, 2.0, 10.0));
  const AggregateReport rep = aggregate(rows);
  CHECK(rep.dollars_per_mile_defined);
  CHECK(rep.dollars_per_mile == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(rep.reward_mean == doctest::Approx(6.0));
  CHECK(rep.reward_min == 5.0);
  CHECK(rep.reward_max == 7.0);
  CHECK(rep.reward_std == doctest::Approx(1.0));  // population, not sample
}

TEST_CASE("aggregate rejects an empty list and handles singletons") {
  CHECK_THROWS_AS(aggregate({}), EmptyInputError);
  const AggregateReport rep = aggregate({fake_metrics(3, 4.5, 0.0, 0.0)});
  CHECK(rep.episodes == 1);
  CHECK(rep.reward_mean == 4.5);
  CHECK(rep.reward_std == 0.0);
  CHECK(rep.reward_min == 4.5);
  CHECK(rep.reward_max == 4.5);
}

TEST_CASE("aggregate statistics are permutation invariant") {
  std::vector<EpisodeMetrics> rows;
  for (int i = 0; i < 9; ++i) {
    rows.push_back(fake_metrics(i, 3.0 * i - 7.0, 0.5 * i, i));
  }
  const AggregateReport a = aggregate(rows);
  std::reverse(rows.begin(), rows.end());
  const AggregateReport b = aggregate(rows);
  CHECK(a.reward_mean == b.reward_mean);
  CHECK(a.reward_std == b.reward_std);
  CHECK(a.reward_min == b.reward_min);
  CHECK(a.reward_max == b.reward_max);
  CHECK(a.dollars_per_mile == b.dollars_per_mile);
}

TEST_CASE("charge histogram bins by hour of the decision clock") {
  std::vector<ChargeEvent> events;
  events.push_back({30.5, 10.0, 1.0, false});    // 00:30
  events.push_back({1439.9, 10.0, 1.0, false});  // 23:59
  events.push_back({1445.0, 10.0, 1.0, true});   // next day 00:05
  events.push_back({10079.0, 10.0, 1.0, true});  // last week hour 23
  const auto bins = charge_histogram(events);
  CHECK(bins[0] == 2);
  CHECK(bins[23] == 2);
  long total = 0;
  for (long b : bins) total += b;
  CHECK(total == static_cast<long>(events.size()));
}

TEST_CASE("aggregate splits the histogram by forced flag and conserves mass") {
  EpisodeMetrics m = fake_metrics(0, 1.0, 1.0, 1.0);
  m.charge_events.push_back({60.0, 5.0, 1.0, false});   // 01:00 voluntary
  m.charge_events.push_back({540.0, 5.0, 1.0, true});   // 09:00 forced
  m.charge_events.push_back({540.0, 5.0, 1.0, false});  // 09:00 voluntary
  const AggregateReport rep = aggregate({m, m});
  CHECK(rep.hist_voluntary[1] == 2);
  CHECK(rep.hist_voluntary[9] == 2);
  CHECK(rep.hist_forced[9] == 2);
  long total = 0;
  for (int h = 0; h < 24; ++h) total += rep.hist_voluntary[h] + rep.hist_forced[h];
  CHECK(total == 6);
}

TEST_CASE("moving average: trailing window semantics") {
  const std::vector<double> series{0.0, 10.0};
  const auto smooth = moving_average(series, 2);
  REQUIRE(smooth.size() == 2);
  CHECK(smooth[0] == 0.0);
  CHECK(smooth[1] == 5.0);

  const std::vector<double> longer{1.0, 2.0, 3.0, 4.0};
  const auto w1 = moving_average(longer, 1);
  CHECK(w1 == longer);

  const auto w3 = moving_average(longer, 3);
  CHECK(w3[0] == doctest::Approx(1.0));
  CHECK(w3[1] == doctest::Approx(1.5));
  CHECK(w3[2] == doctest::Approx(2.0));
  CHECK(w3[3] == doctest::Approx(3.0));

  const std::vector<double> flat(50, 2.5);
  for (double v : moving_average(flat, 10)) CHECK(v == doctest::Approx(2.5));

  CHECK_THROWS_AS(moving_average(series, 0), InvalidParamsError);
}

TEST_CASE("run_episode is deterministic and reconciles its ledger") {
  EnvConfig cfg = day_config(21);
  cfg.emissions_weight = 0.0;  // reward reduces to revenue minus energy cost
  auto policy = make_policy("heuristic:0.30");
  const EpisodeMetrics a = run_episode(cfg, *policy, 21);
  const EpisodeMetrics b = run_episode(cfg, *policy, 21);
  CHECK(same_metrics(a, b));

  CHECK(a.steps > 0);
  CHECK(a.rides_completed > 0);
  CHECK(a.final_clock_min >= cfg.horizon_min);
  CHECK(a.total_reward ==
        doctest::Approx(a.revenue_usd - a.energy_cost_usd).epsilon(1e-9));
  double event_cost = 0;
  for (const auto& e : a.charge_events) event_cost += e.cost_usd;
  CHECK(event_cost == doctest::Approx(a.energy_cost_usd).epsilon(1e-9));
}

TEST_CASE("run_episodes assigns consecutive seeds in row order") {
  const EnvConfig cfg = day_config(5);
  const auto rows = run_episodes(cfg, "heuristic:0.10", 4, 100);
  REQUIRE(rows.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(rows[i].seed == 100 + static_cast<std::uint64_t>(i));
  }
}

TEST_CASE("worker fan-out does not change evaluation results") {
  const EnvConfig cfg = day_config(31);
  const auto serial = run_episodes(cfg, "heuristic:0.25", 6, 7, 1);
  const auto parallel = run_episodes(cfg, "heuristic:0.25", 6, 7, 3);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(same_metrics(serial[i], parallel[i]));
  }
}

TEST_CASE("report JSON round-trips exactly") {
  EnvConfig cfg = day_config(41);
  auto rows = run_episodes(cfg, "heuristic:0.10", 3, 41);
  AggregateReport rep = aggregate(rows);
  rep.policy = "heuristic:0.10";

  const nlohmann::json doc = report_to_json(rep);
  const AggregateReport back = report_from_json(doc);
  CHECK(back.policy == rep.policy);
  CHECK(back.episodes == rep.episodes);
  CHECK(back.reward_mean == rep.reward_mean);
  CHECK(back.reward_std == rep.reward_std);
  CHECK(back.reward_min == rep.reward_min);
  CHECK(back.reward_max == rep.reward_max);
  CHECK(back.dollars_per_mile_defined == rep.dollars_per_mile_defined);
  CHECK(back.dollars_per_mile == rep.dollars_per_mile);
  CHECK(back.hist_voluntary == rep.hist_voluntary);
  CHECK(back.hist_forced == rep.hist_forced);
  REQUIRE(back.rows.size() == rep.rows.size());
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    CHECK(same_metrics(back.rows[i], rep.rows[i]));
  }

  const fs::path path = temp_file("report.json");
  save_report(rep, path.string());
  const AggregateReport loaded = load_report(path.string());
  CHECK(loaded.reward_mean == rep.reward_mean);
  CHECK(loaded.rows.size() == rep.rows.size());
  fs::remove(path);

  CHECK_THROWS_AS(load_report("/nonexistent/report.json"), IoError);
  CHECK_THROWS_AS(report_from_json(nlohmann::json{{"version", 2}}), ParseError);
}

TEST_CASE("episode CSV writes one row per episode plus a header") {
  std::vector<EpisodeMetrics> rows;
  rows.push_back(fake_metrics(0, 1.5, 0.3, 2.0));
  rows.push_back(fake_metrics(1, -2.0, 0.0, 0.0));  // no miles -> empty cell
  const AggregateReport rep = aggregate(rows);

  const fs::path path = temp_file("episodes.csv");
  write_episodes_csv(rep, path.string());
  const auto lines = read_lines(path);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0].substr(0, 11) == "seed,reward");
  CHECK(lines[1].find("0.15") != std::string::npos);  // 0.3 / 2.0 per mile
  CHECK(lines[2].back() == ',');
  fs::remove(path);
}

TEST_CASE("histogram CSV always holds 24 hour rows") {
  const AggregateReport rep = aggregate({fake_metrics(0, 1.0, 0.0, 0.0)});
  const fs::path path = temp_file("hist.csv");
  write_histogram_csv(rep, path.string());
  const auto lines = read_lines(path);
  REQUIRE(lines.size() == 25);
  CHECK(lines[0] == "hour,voluntary,forced");
  CHECK(lines[1] == "0,0,0");
  CHECK(lines[24] == "23,0,0");
  fs::remove(path);
}

TEST_CASE("smoothed rewards CSV with window 1 echoes the raw column") {
  std::vector<EpisodeMetrics> rows;
  for (int i = 0; i < 5; ++i) {
    rows.push_back(fake_metrics(i, 0.125 * i - 0.3, 0.0, 0.0));
  }
  const AggregateReport rep = aggregate(rows);
  const fs::path path = temp_file("smooth.csv");
  write_smoothed_rewards_csv(rep, 1, path.string());
  const auto lines = read_lines(path);
  REQUIRE(lines.size() == 6);
  CHECK(lines[0] == "episode,reward,smoothed");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto first = lines[i].find(',');
    const auto second = lines[i].find(',', first + 1);
    CHECK(lines[i].substr(first + 1, second - first - 1) ==
          lines[i].substr(second + 1));
  }
  fs::remove(path);
}

TEST_CASE("curve CSV has one row per training episode") {
  const std::vector<double> rewards{1.0, 2.5, -0.75};
  const fs::path path = temp_file("curve.csv");
  write_curve_csv(rewards, path.string());
  const auto lines = read_lines(path);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "episode,reward");
  CHECK(lines[2] == "1,2.5");
  fs::remove(path);
}

TEST_CASE("format_double round-trips through parsing") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-7, 12345.6789, 0.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
}
