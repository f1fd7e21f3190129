#include "evsim/trips.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "evsim/csv.hpp"
#include "evsim/errors.hpp"
#include "evsim/timeutil.hpp"
#include "evsim/world.hpp"

namespace evsim {

using nlohmann::json;

// ---------------------------------------------------------------------------
// CsvReader

CsvReader::CsvReader(std::istream& in) : in_(in) {
  std::string line;
  if (std::getline(in_, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    header_ = split_csv_line(line);
  }
}

int CsvReader::column(const std::string& name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

bool CsvReader::next(std::vector<std::string>& fields) {
  std::string line;
  while (std::getline(in_, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fields = split_csv_line(line);
    return true;
  }
  return false;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

// ---------------------------------------------------------------------------
// TripModel

TripModel::TripModel(ZoneGrid grid, ModelKind kind)
    : grid_(grid), kind_(kind) {
  grid_.validate();
  buckets_.resize(static_cast<std::size_t>(grid_.zone_count()) * 24);
  zone_totals_.assign(grid_.zone_count(), 0);
}

const std::vector<StoredTrip>& TripModel::bucket(int zone, int hour) const {
  return buckets_[static_cast<std::size_t>(zone) * 24 + hour];
}

void TripModel::insert(int zone, int hour, StoredTrip trip) {
  buckets_[static_cast<std::size_t>(zone) * 24 + hour].push_back(trip);
  ++zone_totals_[zone];
  ++hour_totals_[hour];
  ++total_;
}

TripModel::Tier TripModel::tier_for(int zone, int hour) const {
  if (!bucket(zone, hour).empty()) return Tier::Bucket;
  if (zone_totals_[zone] > 0) return Tier::ZoneAnyHour;
  if (hour_totals_[hour] > 0) return Tier::AnyZoneHour;
  return Tier::Global;
}

const StoredTrip& TripModel::pick(int zone, int hour, Tier tier,
                                  Rng& rng) const {
  switch (tier) {
    case Tier::Bucket: {
      const auto& b = bucket(zone, hour);
      return b[uniform_index(rng, b.size())];
    }
    case Tier::ZoneAnyHour: {
      std::size_t k = uniform_index(rng, zone_totals_[zone]);
      for (int h = 0; h < 24; ++h) {
        const auto& b = bucket(zone, h);
        if (k < b.size()) return b[k];
        k -= b.size();
      }
      break;
    }
    case Tier::AnyZoneHour: {
      std::size_t k = uniform_index(rng, hour_totals_[hour]);
      for (int z = 0; z < grid_.zone_count(); ++z) {
        const auto& b = bucket(z, hour);
        if (k < b.size()) return b[k];
        k -= b.size();
      }
      break;
    }
    case Tier::Global: {
      std::size_t k = uniform_index(rng, total_);
      for (const auto& b : buckets_) {
        if (k < b.size()) return b[k];
        k -= b.size();
      }
      break;
    }
  }
  throw Error("trip model tier walk exhausted");  // unreachable on valid state
}

TripRequest TripModel::sample(int origin, double clock_min, Rng& rng) const {
  if (empty()) throw EmptyModelError("trip model holds no trips");
  int hour = hour_of_day(clock_min);
  const StoredTrip& t = pick(origin, hour, tier_for(origin, hour), rng);
  return TripRequest{origin, t.destination, t.distance_mi, t.duration_min,
                     t.fare_usd};
}

// ---------------------------------------------------------------------------
// Ingestion

TripModelBuilder::TripModelBuilder(ZoneGrid grid, std::uint64_t reservoir_seed)
    : model_(grid, ModelKind::Empirical),
      seen_(static_cast<std::size_t>(grid.zone_count()) * 24, 0),
      reservoir_rng_(mix_seed(reservoir_seed)) {}

void TripModelBuilder::add(const TripRecord& record) {
  ++stats_.total;
  double duration_min =
      static_cast<double>(record.dropoff_sec - record.pickup_sec) / 60.0;
  if (duration_min <= 0 || record.distance_mi < 0 || record.fare_usd < 0) {
    ++stats_.dropped_invalid;
    return;
  }
  const ZoneGrid& grid = model_.grid();
  if (!grid.contains(record.pickup_lon, record.pickup_lat) ||
      !grid.contains(record.dropoff_lon, record.dropoff_lat)) {
    ++stats_.dropped_out_of_bounds;
    return;
  }
  int zone = grid.locate(record.pickup_lon, record.pickup_lat);
  int dest = grid.locate(record.dropoff_lon, record.dropoff_lat);
  int hour = timestamp_hour(record.pickup_sec);
  StoredTrip trip{dest, record.distance_mi, duration_min, record.fare_usd};

  std::size_t idx = static_cast<std::size_t>(zone) * 24 + hour;
  std::size_t arrivals = ++seen_[idx];
  auto& bucket = model_.buckets_[idx];
  if (bucket.size() < TripModel::kBucketCap) {
    model_.insert(zone, hour, trip);
    ++stats_.stored;
    return;
  }
  // Reservoir replacement keeps the bucket a uniform sample of the stream.
  std::size_t slot = uniform_index(reservoir_rng_, arrivals);
  if (slot < TripModel::kBucketCap) {
    bucket[slot] = trip;
  }
  ++stats_.dropped_capacity;
}

TripModel TripModelBuilder::build() && {
  if (model_.empty()) {
    throw EmptyModelError("no trip records survived filtering");
  }
  return std::move(model_);
}

TripModel ingest_trips(const std::vector<TripRecord>& records,
                       const ZoneGrid& grid, IngestStats* stats) {
  TripModelBuilder builder(grid);
  for (const auto& r : records) builder.add(r);
  if (stats) *stats = builder.stats();
  return std::move(builder).build();
}

TripModel ingest_csv(std::istream& in, const ZoneGrid& grid,
                     IngestStats* stats) {
  CsvReader reader(in);
  const char* names[] = {"tpep_pickup_datetime", "tpep_dropoff_datetime",
                         "pickup_longitude",     "pickup_latitude",
                         "dropoff_longitude",    "dropoff_latitude",
                         "trip_distance",        "fare_amount"};
  int col[8];
  for (int i = 0; i < 8; ++i) {
    col[i] = reader.column(names[i]);
    if (col[i] < 0) {
      throw ParseError(std::string("missing CSV column '") + names[i] + "'");
    }
  }
  TripModelBuilder builder(grid);
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    int max_col = *std::max_element(col, col + 8);
    if (static_cast<int>(fields.size()) <= max_col) {
      throw ParseError("CSV row has too few fields");
    }
    TripRecord r;
    try {
      r.pickup_sec = parse_timestamp_seconds(fields[col[0]]);
      r.dropoff_sec = parse_timestamp_seconds(fields[col[1]]);
      r.pickup_lon = std::stod(fields[col[2]]);
      r.pickup_lat = std::stod(fields[col[3]]);
      r.dropoff_lon = std::stod(fields[col[4]]);
      r.dropoff_lat = std::stod(fields[col[5]]);
      r.distance_mi = std::stod(fields[col[6]]);
      r.fare_usd = std::stod(fields[col[7]]);
    } catch (const std::invalid_argument&) {
      throw ParseError("malformed numeric field in CSV row");
    } catch (const std::out_of_range&) {
      throw ParseError("numeric field out of range in CSV row");
    }
    builder.add(r);
  }
  if (stats) *stats = builder.stats();
  return std::move(builder).build();
}

TripModel ingest_csv_file(const std::string& path, const ZoneGrid& grid,
                          IngestStats* stats) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trip CSV: " + path);
  return ingest_csv(in, grid, stats);
}

// ---------------------------------------------------------------------------
// Synthetic generation

bool SyntheticParams::surge_active(int hour) const {
  for (const auto& [lo, hi] : surge_windows) {
    if (hour >= lo && hour < hi) return true;
  }
  return false;
}

std::array<double, 24> SyntheticParams::default_demand() {
  std::array<double, 24> d{};
  for (int h = 0; h < 24; ++h) {
    if (h <= 5) d[h] = 0.4;
    else if (h == 6) d[h] = 0.8;
    else if (h <= 9) d[h] = 1.5;
    else if (h <= 15) d[h] = 1.0;
    else if (h <= 18) d[h] = 1.5;
    else if (h <= 21) d[h] = 1.1;
    else d[h] = 0.7;
  }
  return d;
}

double synthetic_fare(const SyntheticParams& params, double distance_mi,
                      int hour) {
  double surge = params.surge_active(hour) ? params.surge : 1.0;
  return (params.base_fare + params.per_mile * distance_mi) * surge;
}

TripModel synthetic_model(const ZoneGrid& grid, const SyntheticParams& params,
                          const Speeds& speeds) {
  if (params.dest_scale_steps <= 0) {
    throw InvalidParamsError("dest_scale_steps must be positive");
  }
  if (params.base_fare < 0 || params.per_mile < 0 || params.surge < 0) {
    throw InvalidParamsError("fare rates must be non-negative");
  }
  if (params.trips_per_bucket <= 0) {
    throw InvalidParamsError("trips_per_bucket must be positive");
  }
  if (speeds.offpeak_mph <= 0 || speeds.peak_mph <= 0) {
    throw InvalidParamsError("speeds must be positive");
  }
  speeds.validate();

  std::array<double, 24> demand = params.demand_by_hour;
  if (std::all_of(demand.begin(), demand.end(),
                  [](double v) { return v == 0; })) {
    demand = SyntheticParams::default_demand();
  }

  TripModel model(grid, ModelKind::Synthetic);
  Rng rng(mix_seed(params.seed));
  const int zones = grid.zone_count();

  std::vector<double> cumulative(zones);
  for (int origin = 0; origin < zones; ++origin) {
    // Destination weights, stabilized by the minimum distance so that
    // scale -> 0 degenerates to the nearest distinct neighbors.
    int min_dist = grid.rows + grid.cols;
    for (int z = 0; z < zones; ++z) {
      if (z != origin) min_dist = std::min(min_dist, grid.manhattan(origin, z));
    }
    double total = 0;
    for (int z = 0; z < zones; ++z) {
      double w = 0;
      if (z != origin) {
        int d = grid.manhattan(origin, z);
        w = std::exp(-(d - min_dist) / params.dest_scale_steps);
      }
      total += w;
      cumulative[z] = total;
    }

    for (int hour = 0; hour < 24; ++hour) {
      int count = std::max(
          1, static_cast<int>(std::lround(params.trips_per_bucket *
                                          demand[hour])));
      double mph = speeds.in_peak(hour) ? speeds.peak_mph : speeds.offpeak_mph;
      for (int i = 0; i < count; ++i) {
        double u = uniform01(rng) * total;
        int dest = static_cast<int>(
            std::lower_bound(cumulative.begin(), cumulative.end(), u) -
            cumulative.begin());
        if (dest >= zones) dest = zones - 1;
        if (dest == origin) dest = origin + 1 < zones ? origin + 1 : origin - 1;
        double distance = grid.miles_between(origin, dest);
        double duration = distance / mph * kMinutesPerHour;
        double fare = synthetic_fare(params, distance, hour);
        model.insert(origin, hour, {dest, distance, duration, fare});
      }
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Serialization

json model_to_json(const TripModel& model) {
  const ZoneGrid& g = model.grid();
  json buckets = json::array();
  for (int z = 0; z < g.zone_count(); ++z) {
    for (int h = 0; h < 24; ++h) {
      const auto& b = model.bucket(z, h);
      if (b.empty()) continue;
      json trips = json::array();
      for (const auto& t : b) {
        trips.push_back({t.destination, t.distance_mi, t.duration_min,
                         t.fare_usd});
      }
      buckets.push_back({{"zone", z}, {"hour", h}, {"trips", trips}});
    }
  }
  return json{
      {"version", 1},
      {"kind", model.kind() == ModelKind::Empirical ? "empirical" : "synthetic"},
      {"grid",
       {{"rows", g.rows},
        {"cols", g.cols},
        {"bbox", {g.min_lon, g.min_lat, g.max_lon, g.max_lat}},
        {"cell_miles", g.cell_miles}}},
      {"buckets", buckets},
  };
}

TripModel model_from_json(const json& doc) {
  if (!doc.is_object() || doc.value("version", 0) != 1) {
    throw ParseError("unsupported trip model document");
  }
  const json& jg = doc.at("grid");
  ZoneGrid grid;
  grid.rows = jg.at("rows").get<int>();
  grid.cols = jg.at("cols").get<int>();
  const json& bbox = jg.at("bbox");
  grid.min_lon = bbox.at(0).get<double>();
  grid.min_lat = bbox.at(1).get<double>();
  grid.max_lon = bbox.at(2).get<double>();
  grid.max_lat = bbox.at(3).get<double>();
  grid.cell_miles = jg.at("cell_miles").get<double>();

  ModelKind kind = doc.value("kind", "empirical") == "synthetic"
                       ? ModelKind::Synthetic
                       : ModelKind::Empirical;
  TripModel model(grid, kind);
  for (const json& jb : doc.at("buckets")) {
    int zone = jb.at("zone").get<int>();
    int hour = jb.at("hour").get<int>();
    if (!grid.valid_zone(zone) || hour < 0 || hour > 23) {
      throw ParseError("bucket key outside grid or hour range");
    }
    for (const json& jt : jb.at("trips")) {
      StoredTrip t{jt.at(0).get<int>(), jt.at(1).get<double>(),
                   jt.at(2).get<double>(), jt.at(3).get<double>()};
      if (!grid.valid_zone(t.destination) || t.duration_min <= 0 ||
          t.distance_mi < 0 || t.fare_usd < 0) {
        throw ParseError("stored trip violates model invariants");
      }
      model.insert(zone, hour, t);
    }
  }
  if (model.empty()) throw EmptyModelError("trip model document has no trips");
  return model;
}

void save_model(const TripModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write trip model: " + path);
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw IoError("short write: " + path);
}

TripModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trip model: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("trip model JSON: ") + e.what());
  }
  return model_from_json(doc);
}

}  // namespace evsim
