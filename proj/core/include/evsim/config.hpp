#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "evsim/env.hpp"
#include "evsim/learner.hpp"
#include "evsim/trips.hpp"
#include "evsim/world.hpp"

namespace evsim {

enum class TripSource { Synthetic, File };

// One merged experiment configuration: grid + world + env + trips + train.
// Every field has an embedded default; JSON documents override per key and
// unknown keys are rejected.
struct SimConfig {
  ZoneGrid grid;

  // world
  double battery_kwh = 100.0;
  double charge_kw = 100.0;
  double consumption_kwh_per_mile = 0.5;
  GridSchedule schedule = GridSchedule::defaults();
  QueueProfile default_queue;
  std::vector<ChargingStation> stations;  // empty -> evenly_spread placement
  Speeds speeds;

  // env
  double emissions_weight = 0.05;
  double horizon_min = 10080.0;
  double reserve_kwh = 2.0;
  int start_zone = -1;
  std::uint64_t env_seed = 1;

  // trips
  TripSource trip_source = TripSource::Synthetic;
  std::string model_path;
  SyntheticParams synth;

  // train
  LearnerConfig learner;

  static SimConfig from_json(const nlohmann::json& doc);
  static SimConfig load(const std::string& path);
  nlohmann::json to_json() const;

  // Applies a dotted-key override, e.g. "env.emissions_weight=0".
  // The key must already exist; the value is parsed as JSON when possible.
  void set_override(const std::string& assignment);

  ChargingNetwork build_network() const;
  std::shared_ptr<const TripModel> build_trips() const;
  EnvConfig build_env(std::shared_ptr<const TripModel> trips) const;
  EnvConfig build_env() const { return build_env(build_trips()); }
};

}  // namespace evsim
