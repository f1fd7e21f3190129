#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "evsim/grid.hpp"
#include "evsim/rng.hpp"

namespace evsim {

struct Speeds;
struct SyntheticParams;

// One raw trip record, e.g. a parsed NYC TLC yellow-cab row.
struct TripRecord {
  std::int64_t pickup_sec = 0;
  std::int64_t dropoff_sec = 0;
  double pickup_lon = 0, pickup_lat = 0;
  double dropoff_lon = 0, dropoff_lat = 0;
  double distance_mi = 0;
  double fare_usd = 0;
};

// A trip stored in the model, conditioned on (origin zone, hour).
struct StoredTrip {
  int destination = 0;
  double distance_mi = 0;
  double duration_min = 0;
  double fare_usd = 0;
};

// A ride offered to the EV. Always originates at the EV's current zone.
struct TripRequest {
  int origin = 0;
  int destination = 0;
  double distance_mi = 0;
  double duration_min = 0;
  double fare_usd = 0;
};

enum class ModelKind { Empirical, Synthetic };

struct IngestStats {
  std::size_t total = 0;
  std::size_t stored = 0;
  std::size_t dropped_invalid = 0;
  std::size_t dropped_out_of_bounds = 0;
  std::size_t dropped_capacity = 0;
  std::size_t dropped() const {
    return dropped_invalid + dropped_out_of_bounds + dropped_capacity;
  }
};

// Conditional trip distribution keyed on (origin zone, hour-of-day).
// Immutable once built; sampling draws uniformly from the first non-empty
// tier of (zone, hour) -> (zone, any hour) -> (any zone, hour) -> global.
class TripModel {
 public:
  static constexpr std::size_t kBucketCap = 10000;

  TripModel(ZoneGrid grid, ModelKind kind);

  const ZoneGrid& grid() const { return grid_; }
  ModelKind kind() const { return kind_; }

  const std::vector<StoredTrip>& bucket(int zone, int hour) const;
  std::size_t bucket_size(int zone, int hour) const {
    return bucket(zone, hour).size();
  }
  std::size_t trip_count() const { return total_; }
  bool empty() const { return total_ == 0; }

  // Which fallback tier sample() would use for (zone, hour).
  enum class Tier { Bucket, ZoneAnyHour, AnyZoneHour, Global };
  Tier tier_for(int zone, int hour) const;

  // Draws a trip for the given origin and clock. Throws EmptyModelError if
  // the model holds no trips at all.
  TripRequest sample(int origin, double clock_min, Rng& rng) const;

 private:
  friend class TripModelBuilder;
  friend TripModel model_from_json(const nlohmann::json& doc);
  friend TripModel synthetic_model(const ZoneGrid& grid,
                                   const SyntheticParams& params,
                                   const Speeds& speeds);

  void insert(int zone, int hour, StoredTrip trip);
  const StoredTrip& pick(int zone, int hour, Tier tier, Rng& rng) const;

  ZoneGrid grid_;
  ModelKind kind_;
  std::vector<std::vector<StoredTrip>> buckets_;  // zone * 24 + hour
  std::vector<std::size_t> zone_totals_;
  std::array<std::size_t, 24> hour_totals_{};
  std::size_t total_ = 0;
};

// Streaming construction with per-record filtering and a per-bucket
// reservoir cap of TripModel::kBucketCap.
class TripModelBuilder {
 public:
  explicit TripModelBuilder(ZoneGrid grid, std::uint64_t reservoir_seed = 0);

  void add(const TripRecord& record);

  const IngestStats& stats() const { return stats_; }

  // Throws EmptyModelError if no record survived filtering.
  TripModel build() &&;

 private:
  TripModel model_;
  IngestStats stats_;
  std::vector<std::size_t> seen_;  // arrivals per bucket, for the reservoir
  Rng reservoir_rng_;
};

// Builds a model from an in-memory batch of records.
TripModel ingest_trips(const std::vector<TripRecord>& records,
                       const ZoneGrid& grid, IngestStats* stats = nullptr);

// Reads NYC TLC 2015 yellow-cab compatible CSV (columns located by header
// name) and feeds rows through a TripModelBuilder.
TripModel ingest_csv(std::istream& in, const ZoneGrid& grid,
                     IngestStats* stats = nullptr);
TripModel ingest_csv_file(const std::string& path, const ZoneGrid& grid,
                          IngestStats* stats = nullptr);

// Parametric trip generator used when no dataset is available. Buckets are
// materialized so sampling works identically for both model kinds.
struct SyntheticParams {
  double dest_scale_steps = 3.0;  // softmax length scale, in grid steps
  double base_fare = 2.50;
  double per_mile = 1.80;
  double surge = 1.5;
  std::vector<std::pair<int, int>> surge_windows{{7, 10}, {16, 19}};
  int trips_per_bucket = 24;  // scaled by demand_by_hour
  std::array<double, 24> demand_by_hour{};  // zeros mean "use defaults"
  std::uint64_t seed = 7;

  bool surge_active(int hour) const;
  static std::array<double, 24> default_demand();
};

// Throws InvalidParamsError for non-positive scale or speeds.
TripModel synthetic_model(const ZoneGrid& grid, const SyntheticParams& params,
                          const Speeds& speeds);

double synthetic_fare(const SyntheticParams& params, double distance_mi,
                      int hour);

// Versioned JSON serialization: {version, kind, grid, buckets}.
nlohmann::json model_to_json(const TripModel& model);
TripModel model_from_json(const nlohmann::json& doc);
void save_model(const TripModel& model, const std::string& path);
TripModel load_model(const std::string& path);

}  // namespace evsim
