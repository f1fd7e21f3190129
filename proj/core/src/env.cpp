#include "evsim/env.hpp"

#include <algorithm>
#include <cmath>

#include "evsim/errors.hpp"
#include "evsim/timeutil.hpp"

namespace evsim {

double EnvConfig::queue_scale() const {
  // An empty network resolves to the evenly spread default at construction,
  // so scale by that profile's bound here as well.
  if (network.stations.empty()) {
    const double bound = QueueProfile{}.max_wait_bound();
    return bound > 0 ? bound : 1.0;
  }
  double scale = 0;
  for (const auto& st : network.stations) {
    scale = std::max(scale, st.queue.max_wait_bound());
  }
  return scale > 0 ? scale : 1.0;
}

void EnvConfig::validate() const {
  grid.validate();
  schedule.validate();
  speeds.validate();
  network.validate(grid);
  if (battery_kwh <= 0) {
    throw InvalidConfigError("battery_kwh must be positive");
  }
  if (consumption_kwh_per_mile <= 0) {
    throw InvalidConfigError("consumption_kwh_per_mile must be positive");
  }
  if (emissions_weight < 0) {
    throw InvalidConfigError("emissions_weight must be >= 0");
  }
  if (horizon_min <= 0) throw InvalidConfigError("horizon_min must be > 0");
  if (reserve_kwh < 0) throw InvalidConfigError("reserve_kwh must be >= 0");
  if (!grid.valid_zone(resolved_start_zone())) {
    throw InvalidConfigError("start_zone outside grid");
  }
  if (!trips) throw InvalidConfigError("trip model not set");
  if (trips->empty()) throw InvalidConfigError("trip model is empty");
}

Env::Env(EnvConfig config) : cfg_(std::move(config)) {
  if (cfg_.network.stations.empty()) {
    cfg_.network = ChargingNetwork::evenly_spread(cfg_.grid);
  }
  cfg_.validate();
}

Observation Env::reset(std::uint64_t seed) {
  clock_ = 0;
  zone_ = cfg_.resolved_start_zone();
  battery_ = Battery{cfg_.battery_kwh, cfg_.battery_kwh};
  rng_.seed(mix_seed(seed));
  totals_ = EpisodeTotals{};
  done_ = false;
  started_ = true;
  pending_ = cfg_.trips->sample(zone_, clock_, rng_);
  return observe();
}

Observation Env::observe() const {
  Observation obs;
  obs.battery_frac = battery_.fraction();
  obs.time_of_day_frac = minute_of_day(clock_) / kMinutesPerDay;
  obs.ride_energy_frac =
      ride_energy(pending_, cfg_.consumption_kwh_per_mile) / cfg_.battery_kwh;

  // Hypothetical full-charge session at the nearest station, priced at the
  // current battery level and clock.
  int si = cfg_.network.nearest(zone_, cfg_.grid);
  const ChargingStation& station = cfg_.network.stations[si];
  Battery copy = battery_;
  ChargingSession session =
      charge_session(copy, station, si, clock_, cfg_.schedule);
  obs.charge_cost_norm = session.cost_usd / cfg_.cost_scale();
  obs.charge_emissions_norm = session.emissions_kg / cfg_.emissions_scale();
  obs.finish_time_frac = minute_of_day(session.end_min()) / kMinutesPerDay;
  obs.queue_frac = session.wait_min / cfg_.queue_scale();
  return obs;
}

bool Env::ride_feasible() const {
  return battery_.level_kwh - ride_energy(pending_, cfg_.consumption_kwh_per_mile) >=
         cfg_.reserve_kwh;
}

Env::ChargeOutcome Env::execute_charge() {
  ChargeOutcome out;
  int si = cfg_.network.nearest(zone_, cfg_.grid);
  const ChargingStation& station = cfg_.network.stations[si];
  out.reloc_miles = cfg_.grid.miles_between(zone_, station.zone);
  out.reloc_min = out.reloc_miles / cfg_.speeds.offpeak_mph * kMinutesPerHour;
  // The EV limps in: relocation drain is clamped at the remaining charge.
  battery_.drain(out.reloc_miles * cfg_.consumption_kwh_per_mile);
  out.session = charge_session(battery_, station, si, clock_ + out.reloc_min,
                               cfg_.schedule);
  out.elapsed_min = out.reloc_min + out.session.wait_min + out.session.charge_min;
  zone_ = station.zone;
  return out;
}

StepResult Env::step(Action action) {
  if (!started_) throw Error("step() before reset()");
  if (done_) throw EpisodeFinishedError("episode already finished");

  const double decision_clock = clock_;
  StepResult result;

  if (action == Action::Charge || !ride_feasible()) {
    bool forced = action != Action::Charge;
    ChargeOutcome out = execute_charge();
    clock_ = decision_clock + out.elapsed_min;

    double penalty = out.session.cost_usd +
                     out.session.emissions_kg * cfg_.emissions_weight;
    result.reward = forced ? -EnvConfig::kPenaltyMultiplier * penalty
                           : -penalty;
    result.info.branch = forced ? "forced_charge" : "charge";
    result.info.cost_usd = out.session.cost_usd;
    result.info.emissions_kg = out.session.emissions_kg;

    totals_.energy_cost_usd += out.session.cost_usd;
    totals_.emissions_kg += out.session.emissions_kg;
    totals_.charge_events.push_back({decision_clock, out.session.energy_kwh,
                                     out.session.cost_usd, forced});
    if (forced) ++totals_.infeasible_events;
  } else {
    battery_.level_kwh -= ride_energy(pending_, cfg_.consumption_kwh_per_mile);
    clock_ = decision_clock + pending_.duration_min;
    zone_ = pending_.destination;

    result.reward = pending_.fare_usd;
    result.info.branch = "ride";
    result.info.fare_usd = pending_.fare_usd;

    totals_.revenue_usd += pending_.fare_usd;
    totals_.ride_miles += pending_.distance_mi;
    ++totals_.rides_completed;
  }

  result.info.elapsed_min = clock_ - decision_clock;
  done_ = clock_ >= cfg_.horizon_min;
  pending_ = cfg_.trips->sample(zone_, clock_, rng_);
  result.obs = observe();
  result.done = done_;
  return result;
}

}  // namespace evsim
