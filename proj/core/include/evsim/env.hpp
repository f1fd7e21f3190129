#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "evsim/grid.hpp"
#include "evsim/rng.hpp"
#include "evsim/trips.hpp"
#include "evsim/world.hpp"

namespace evsim {

enum class Action : int { Charge = 0, AcceptRide = 1 };

// 7-feature observation, each scaled to roughly [0, 1].
struct Observation {
  double battery_frac = 0;
  double time_of_day_frac = 0;
  double ride_energy_frac = 0;
  double charge_cost_norm = 0;
  double charge_emissions_norm = 0;
  double finish_time_frac = 0;
  double queue_frac = 0;

  static constexpr int kDim = 7;
  std::array<double, kDim> array() const {
    return {battery_frac,        time_of_day_frac,   ride_energy_frac,
            charge_cost_norm,    charge_emissions_norm, finish_time_frac,
            queue_frac};
  }
};

struct EnvConfig {
  double battery_kwh = 100.0;
  double consumption_kwh_per_mile = 0.5;
  double emissions_weight = 0.05;  // dollars per kg CO2
  double horizon_min = 10080.0;    // one week
  double reserve_kwh = 2.0;
  int start_zone = -1;  // -1 selects the grid center
  std::uint64_t seed = 1;

  ZoneGrid grid;
  GridSchedule schedule = GridSchedule::defaults();
  ChargingNetwork network;  // empty -> evenly_spread(grid) at validation
  Speeds speeds;
  std::shared_ptr<const TripModel> trips;

  static constexpr double kPenaltyMultiplier = 3.0;

  // Observation normalization scales, derived from the tables.
  double cost_scale() const { return battery_kwh * schedule.max_price(); }
  double emissions_scale() const {
    return battery_kwh * schedule.max_emissions();
  }
  double queue_scale() const;

  int resolved_start_zone() const {
    return start_zone < 0 ? grid.center_zone() : start_zone;
  }

  // Throws InvalidConfigError on violated invariants (missing trip model,
  // non-positive horizon, bad tables, ...).
  void validate() const;
};

struct ChargeEvent {
  double decision_min = 0;  // clock when the decision was made
  double energy_kwh = 0;
  double cost_usd = 0;
  bool forced = false;
};

struct EpisodeTotals {
  double revenue_usd = 0;
  double energy_cost_usd = 0;
  double emissions_kg = 0;
  double ride_miles = 0;
  int rides_completed = 0;
  int infeasible_events = 0;
  std::vector<ChargeEvent> charge_events;
};

struct StepInfo {
  std::string branch;  // "charge" | "ride" | "forced_charge"
  double cost_usd = 0;
  double emissions_kg = 0;
  double fare_usd = 0;
  double elapsed_min = 0;
};

struct StepResult {
  Observation obs;
  double reward = 0;
  bool done = false;
  StepInfo info;
};

// Single-EV decision process over one simulated week. Strictly sequential;
// distinct instances are independent.
class Env {
 public:
  explicit Env(EnvConfig config);

  Observation reset() { return reset(cfg_.seed); }
  Observation reset(std::uint64_t seed);

  // Throws EpisodeFinishedError once the horizon has been reached.
  StepResult step(Action action);

  Observation observe() const;
  bool ride_feasible() const;  // pending ride leaves >= reserve in the pack

  bool done() const { return done_; }
  double clock_min() const { return clock_; }
  int zone() const { return zone_; }
  const Battery& battery() const { return battery_; }
  const TripRequest& pending() const { return pending_; }
  const EpisodeTotals& totals() const { return totals_; }
  const EnvConfig& config() const { return cfg_; }

 private:
  struct ChargeOutcome {
    ChargingSession session;
    double reloc_miles = 0;
    double reloc_min = 0;
    double elapsed_min = 0;
  };
  ChargeOutcome execute_charge();

  EnvConfig cfg_;
  double clock_ = 0;
  int zone_ = 0;
  Battery battery_;
  TripRequest pending_;
  Rng rng_;
  EpisodeTotals totals_;
  bool done_ = false;
  bool started_ = false;
};

}  // namespace evsim
