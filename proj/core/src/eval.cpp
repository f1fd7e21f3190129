#include "evsim/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "evsim/errors.hpp"
#include "evsim/timeutil.hpp"

namespace evsim {

using nlohmann::json;

EpisodeMetrics run_episode(const EnvConfig& config, Policy& policy,
                           std::uint64_t seed) {
  Env env(config);
  Observation obs = env.reset(seed);
  Rng action_rng(split_seed(seed, 0x51EED));

  EpisodeMetrics m;
  m.seed = seed;
  while (!env.done()) {
    Action a = policy.act(obs, action_rng);
    StepResult sr = env.step(a);
    m.total_reward += sr.reward;
    ++m.steps;
    obs = sr.obs;
  }
  const EpisodeTotals& t = env.totals();
  m.revenue_usd = t.revenue_usd;
  m.energy_cost_usd = t.energy_cost_usd;
  m.emissions_kg = t.emissions_kg;
  m.miles = t.ride_miles;
  m.rides_completed = t.rides_completed;
  m.infeasible_events = t.infeasible_events;
  m.charge_events = t.charge_events;
  m.final_clock_min = env.clock_min();
  return m;
}

std::vector<EpisodeMetrics> run_episodes(const EnvConfig& config,
                                         const std::string& policy_spec,
                                         int episodes, std::uint64_t base_seed,
                                         int workers) {
  if (episodes < 0) throw InvalidParamsError("episodes must be >= 0");
  std::vector<EpisodeMetrics> rows(episodes);
  workers = std::max(1, std::min(workers, episodes > 0 ? episodes : 1));

  auto run_range = [&](int begin, int step) {
    auto policy = make_policy(policy_spec);
    for (int i = begin; i < episodes; i += step) {
      rows[i] = run_episode(config, *policy, base_seed + i);
    }
  };

  if (workers == 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      threads.emplace_back(run_range, w, workers);
    }
    for (auto& t : threads) t.join();
  }
  return rows;
}

AggregateReport aggregate(const std::vector<EpisodeMetrics>& metrics) {
  if (metrics.empty()) throw EmptyInputError("no episodes to aggregate");
  AggregateReport rep;
  rep.episodes = static_cast<int>(metrics.size());

  double sum = 0, cost = 0, miles = 0;
  rep.reward_min = metrics.front().total_reward;
  rep.reward_max = metrics.front().total_reward;
  for (const auto& m : metrics) {
    sum += m.total_reward;
    cost += m.energy_cost_usd;
    miles += m.miles;
    rep.reward_min = std::min(rep.reward_min, m.total_reward);
    rep.reward_max = std::max(rep.reward_max, m.total_reward);
    for (const auto& e : m.charge_events) {
      auto& hist = e.forced ? rep.hist_forced : rep.hist_voluntary;
      ++hist[hour_of_day(e.decision_min)];
    }
  }
  rep.reward_mean = sum / rep.episodes;
  double var = 0;
  for (const auto& m : metrics) {
    double d = m.total_reward - rep.reward_mean;
    var += d * d;
  }
  rep.reward_std = std::sqrt(var / rep.episodes);

  if (miles > 0) {
    rep.dollars_per_mile_defined = true;
    rep.dollars_per_mile = cost / miles;
  }
  rep.rows = metrics;
  return rep;
}

std::array<long, 24> charge_histogram(std::span<const ChargeEvent> events) {
  std::array<long, 24> bins{};
  for (const auto& e : events) ++bins[hour_of_day(e.decision_min)];
  return bins;
}

std::vector<double> moving_average(std::span<const double> series, int window) {
  if (window < 1) throw InvalidParamsError("window must be >= 1");
  std::vector<double> out(series.size());
  double running = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    running += series[i];
    if (i >= static_cast<std::size_t>(window)) running -= series[i - window];
    std::size_t span = std::min<std::size_t>(window, i + 1);
    out[i] = running / static_cast<double>(span);
  }
  return out;
}

namespace {

json metrics_to_json(const EpisodeMetrics& m) {
  json events = json::array();
  for (const auto& e : m.charge_events) {
    events.push_back({{"decision_min", e.decision_min},
                      {"energy_kwh", e.energy_kwh},
                      {"cost_usd", e.cost_usd},
                      {"forced", e.forced}});
  }
  return json{{"seed", m.seed},
              {"reward", m.total_reward},
              {"revenue", m.revenue_usd},
              {"energy_cost", m.energy_cost_usd},
              {"emissions_kg", m.emissions_kg},
              {"miles", m.miles},
              {"rides", m.rides_completed},
              {"infeasible", m.infeasible_events},
              {"steps", m.steps},
              {"final_clock_min", m.final_clock_min},
              {"charge_events", events}};
}

EpisodeMetrics metrics_from_json(const json& doc) {
  EpisodeMetrics m;
  m.seed = doc.at("seed").get<std::uint64_t>();
  m.total_reward = doc.at("reward").get<double>();
  m.revenue_usd = doc.at("revenue").get<double>();
  m.energy_cost_usd = doc.at("energy_cost").get<double>();
  m.emissions_kg = doc.at("emissions_kg").get<double>();
  m.miles = doc.at("miles").get<double>();
  m.rides_completed = doc.at("rides").get<int>();
  m.infeasible_events = doc.at("infeasible").get<int>();
  m.steps = doc.at("steps").get<int>();
  m.final_clock_min = doc.at("final_clock_min").get<double>();
  for (const json& je : doc.at("charge_events")) {
    m.charge_events.push_back({je.at("decision_min").get<double>(),
                               je.at("energy_kwh").get<double>(),
                               je.at("cost_usd").get<double>(),
                               je.at("forced").get<bool>()});
  }
  return m;
}

}  // namespace

json report_to_json(const AggregateReport& report) {
  json rows = json::array();
  for (const auto& m : report.rows) rows.push_back(metrics_to_json(m));
  json dpm;
  if (report.dollars_per_mile_defined) dpm = report.dollars_per_mile;
  return json{{"version", 1},
              {"policy", report.policy},
              {"episodes", report.episodes},
              {"reward",
               {{"mean", report.reward_mean},
                {"std", report.reward_std},
                {"min", report.reward_min},
                {"max", report.reward_max}}},
              {"dollars_per_mile", dpm},
              {"histogram",
               {{"voluntary", report.hist_voluntary},
                {"forced", report.hist_forced}}},
              {"per_episode", rows}};
}

AggregateReport report_from_json(const json& doc) {
  if (!doc.is_object() || doc.value("version", 0) != 1) {
    throw ParseError("unsupported report document");
  }
  AggregateReport rep;
  rep.policy = doc.value("policy", "");
  rep.episodes = doc.at("episodes").get<int>();
  const json& r = doc.at("reward");
  rep.reward_mean = r.at("mean").get<double>();
  rep.reward_std = r.at("std").get<double>();
  rep.reward_min = r.at("min").get<double>();
  rep.reward_max = r.at("max").get<double>();
  if (!doc.at("dollars_per_mile").is_null()) {
    rep.dollars_per_mile_defined = true;
    rep.dollars_per_mile = doc.at("dollars_per_mile").get<double>();
  }
  const json& h = doc.at("histogram");
  for (int i = 0; i < 24; ++i) {
    rep.hist_voluntary[i] = h.at("voluntary").at(i).get<long>();
    rep.hist_forced[i] = h.at("forced").at(i).get<long>();
  }
  for (const json& row : doc.at("per_episode")) {
    rep.rows.push_back(metrics_from_json(row));
  }
  return rep;
}

void save_report(const AggregateReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report: " + path);
  out << report_to_json(report).dump(2) << '\n';
  if (!out) throw IoError("short write: " + path);
}

AggregateReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open report: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report JSON: ") + e.what());
  }
  return report_from_json(doc);
}

std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_episodes_csv(const AggregateReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write CSV: " + path);
  out << "seed,reward,revenue,energy_cost,emissions_kg,miles,rides,"
         "infeasible,charges,dollars_per_mile\n";
  for (const auto& m : report.rows) {
    out << m.seed << ',' << format_double(m.total_reward) << ','
        << format_double(m.revenue_usd) << ','
        << format_double(m.energy_cost_usd) << ','
        << format_double(m.emissions_kg) << ',' << format_double(m.miles)
        << ',' << m.rides_completed << ',' << m.infeasible_events << ','
        << m.charge_events.size() << ',';
    if (m.miles > 0) out << format_double(m.energy_cost_usd / m.miles);
    out << '\n';
  }
}

void write_histogram_csv(const AggregateReport& report,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write CSV: " + path);
  out << "hour,voluntary,forced\n";
  for (int h = 0; h < 24; ++h) {
    out << h << ',' << report.hist_voluntary[h] << ',' << report.hist_forced[h]
        << '\n';
  }
}

void write_smoothed_rewards_csv(const AggregateReport& report, int window,
                                const std::string& path) {
  std::vector<double> rewards;
  rewards.reserve(report.rows.size());
  for (const auto& m : report.rows) rewards.push_back(m.total_reward);
  std::vector<double> smooth = moving_average(rewards, window);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write CSV: " + path);
  out << "episode,reward,smoothed\n";
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out << i << ',' << format_double(rewards[i]) << ','
        << format_double(smooth[i]) << '\n';
  }
}

void write_curve_csv(std::span<const double> episode_rewards,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write CSV: " + path);
  out << "episode,reward\n";
  for (std::size_t i = 0; i < episode_rewards.size(); ++i) {
    out << i << ',' << format_double(episode_rewards[i]) << '\n';
  }
}

}  // namespace evsim
