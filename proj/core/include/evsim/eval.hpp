#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "evsim/env.hpp"
#include "evsim/policy.hpp"

namespace evsim {

struct EpisodeMetrics {
  std::uint64_t seed = 0;
  double total_reward = 0;
  double revenue_usd = 0;
  double energy_cost_usd = 0;
  double emissions_kg = 0;
  double miles = 0;
  int rides_completed = 0;
  int infeasible_events = 0;
  int steps = 0;
  double final_clock_min = 0;
  std::vector<ChargeEvent> charge_events;
};

struct AggregateReport {
  std::string policy;
  int episodes = 0;
  double reward_mean = 0;
  double reward_std = 0;  // population
  double reward_min = 0;
  double reward_max = 0;
  bool dollars_per_mile_defined = false;
  double dollars_per_mile = 0;  // pooled: sum(cost) / sum(miles)
  std::array<long, 24> hist_voluntary{};
  std::array<long, 24> hist_forced{};
  std::vector<EpisodeMetrics> rows;
};

// Runs one seeded episode to completion under `policy`.
EpisodeMetrics run_episode(const EnvConfig& config, Policy& policy,
                           std::uint64_t seed);

// Runs `episodes` seeded episodes (seeds base_seed .. base_seed+episodes-1),
// optionally fanned out over workers. Order of rows follows seed order.
std::vector<EpisodeMetrics> run_episodes(const EnvConfig& config,
                                         const std::string& policy_spec,
                                         int episodes, std::uint64_t base_seed,
                                         int workers = 1);

// Throws EmptyInputError on an empty list.
AggregateReport aggregate(const std::vector<EpisodeMetrics>& metrics);

// Counts by hour-of-day of the charge decision.
std::array<long, 24> charge_histogram(std::span<const ChargeEvent> events);

// Trailing mean over min(window, t+1) elements.
std::vector<double> moving_average(std::span<const double> series, int window);

nlohmann::json report_to_json(const AggregateReport& report);
AggregateReport report_from_json(const nlohmann::json& doc);
void save_report(const AggregateReport& report, const std::string& path);
AggregateReport load_report(const std::string& path);

// Plot-ready CSV exports.
void write_episodes_csv(const AggregateReport& report, const std::string& path);
void write_histogram_csv(const AggregateReport& report, const std::string& path);
void write_smoothed_rewards_csv(const AggregateReport& report, int window,
                                const std::string& path);
void write_curve_csv(std::span<const double> episode_rewards,
                     const std::string& path);

// Shortest round-trip decimal formatting; used for all numeric CSV output.
std::string format_double(double value);

}  // namespace evsim
