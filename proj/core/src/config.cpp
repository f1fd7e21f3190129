#include "evsim/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "evsim/errors.hpp"

namespace evsim {

using nlohmann::json;

namespace {

void check_known_keys(const json& obj, std::initializer_list<const char*> keys,
                      const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw InvalidConfigError("unknown config key '" + where + "." +
                               it.key() + "'");
    }
  }
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key) && !obj.at(key).is_null()) {
    out = obj.at(key).get<T>();
  }
}

std::array<double, 24> hours_array(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.size() != 24) {
    throw InvalidConfigError(where + " must hold exactly 24 entries");
  }
  std::array<double, 24> out{};
  for (int i = 0; i < 24; ++i) out[i] = arr.at(i).get<double>();
  return out;
}

std::vector<std::pair<int, int>> windows_from_json(const json& arr,
                                                   const std::string& where) {
  std::vector<std::pair<int, int>> out;
  if (!arr.is_array()) throw InvalidConfigError(where + " must be an array");
  for (const json& w : arr) {
    if (!w.is_array() || w.size() != 2) {
      throw InvalidConfigError(where + " entries must be [start, end) pairs");
    }
    out.emplace_back(w.at(0).get<int>(), w.at(1).get<int>());
  }
  return out;
}

json windows_to_json(const std::vector<std::pair<int, int>>& windows) {
  json arr = json::array();
  for (const auto& [lo, hi] : windows) arr.push_back({lo, hi});
  return arr;
}

QueueProfile queue_from_json(const json& obj, const std::string& where) {
  check_known_keys(obj, {"base_min", "peaks"}, where);
  QueueProfile q;
  get_if(obj, "base_min", q.base_min);
  if (obj.contains("peaks")) {
    q.peaks.clear();
    for (const json& p : obj.at("peaks")) {
      check_known_keys(p, {"center_h", "amp_min", "width_h"}, where + ".peaks");
      QueuePeak peak;
      get_if(p, "center_h", peak.center_h);
      get_if(p, "amp_min", peak.amp_min);
      get_if(p, "width_h", peak.width_h);
      q.peaks.push_back(peak);
    }
  }
  return q;
}

json queue_to_json(const QueueProfile& q) {
  json peaks = json::array();
  for (const auto& p : q.peaks) {
    peaks.push_back({{"center_h", p.center_h},
                     {"amp_min", p.amp_min},
                     {"width_h", p.width_h}});
  }
  return json{{"base_min", q.base_min}, {"peaks", peaks}};
}

}  // namespace

SimConfig SimConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw InvalidConfigError("config must be an object");
  check_known_keys(doc, {"grid", "world", "env", "trips", "train"}, "config");
  SimConfig cfg;

  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    check_known_keys(g, {"rows", "cols", "bbox", "cell_miles"}, "grid");
    get_if(g, "rows", cfg.grid.rows);
    get_if(g, "cols", cfg.grid.cols);
    if (g.contains("bbox")) {
      const json& b = g.at("bbox");
      if (!b.is_array() || b.size() != 4) {
        throw InvalidConfigError("grid.bbox must be [min_lon, min_lat, "
                                 "max_lon, max_lat]");
      }
      cfg.grid.min_lon = b.at(0).get<double>();
      cfg.grid.min_lat = b.at(1).get<double>();
      cfg.grid.max_lon = b.at(2).get<double>();
      cfg.grid.max_lat = b.at(3).get<double>();
    }
    get_if(g, "cell_miles", cfg.grid.cell_miles);
  }

  if (doc.contains("world")) {
    const json& w = doc.at("world");
    check_known_keys(w,
                     {"battery_kwh", "charge_kw", "consumption_kwh_per_mile",
                      "price_by_hour", "emissions_by_hour", "queue",
                      "stations", "speeds"},
                     "world");
    get_if(w, "battery_kwh", cfg.battery_kwh);
    get_if(w, "charge_kw", cfg.charge_kw);
    get_if(w, "consumption_kwh_per_mile", cfg.consumption_kwh_per_mile);
    if (w.contains("price_by_hour")) {
      cfg.schedule.price_per_kwh =
          hours_array(w.at("price_by_hour"), "world.price_by_hour");
    }
    if (w.contains("emissions_by_hour")) {
      cfg.schedule.emissions_kg_per_kwh =
          hours_array(w.at("emissions_by_hour"), "world.emissions_by_hour");
    }
    if (w.contains("queue")) {
      cfg.default_queue = queue_from_json(w.at("queue"), "world.queue");
    }
    if (w.contains("stations") && !w.at("stations").is_null()) {
      for (const json& s : w.at("stations")) {
        check_known_keys(s, {"zone", "power_kw", "queue"}, "world.stations");
        ChargingStation st;
        st.zone = s.at("zone").get<int>();
        st.power_kw = cfg.charge_kw;
        get_if(s, "power_kw", st.power_kw);
        st.queue = s.contains("queue")
                       ? queue_from_json(s.at("queue"), "world.stations.queue")
                       : cfg.default_queue;
        cfg.stations.push_back(st);
      }
    }
    if (w.contains("speeds")) {
      const json& sp = w.at("speeds");
      check_known_keys(sp, {"offpeak_mph", "peak_mph", "peak_windows"},
                       "world.speeds");
      get_if(sp, "offpeak_mph", cfg.speeds.offpeak_mph);
      get_if(sp, "peak_mph", cfg.speeds.peak_mph);
      if (sp.contains("peak_windows")) {
        cfg.speeds.peak_windows =
            windows_from_json(sp.at("peak_windows"), "world.speeds.peak_windows");
      }
    }
  }

  if (doc.contains("env")) {
    const json& e = doc.at("env");
    check_known_keys(e,
                     {"emissions_weight", "horizon_min", "reserve_kwh",
                      "start_zone", "seed"},
                     "env");
    get_if(e, "emissions_weight", cfg.emissions_weight);
    get_if(e, "horizon_min", cfg.horizon_min);
    get_if(e, "reserve_kwh", cfg.reserve_kwh);
    get_if(e, "start_zone", cfg.start_zone);
    get_if(e, "seed", cfg.env_seed);
  }

  if (doc.contains("trips")) {
    const json& t = doc.at("trips");
    check_known_keys(t, {"source", "model_path", "synthetic"}, "trips");
    if (t.contains("source")) {
      std::string src = t.at("source").get<std::string>();
      if (src == "synthetic") {
        cfg.trip_source = TripSource::Synthetic;
      } else if (src == "file") {
        cfg.trip_source = TripSource::File;
      } else {
        throw InvalidConfigError("trips.source must be 'synthetic' or 'file'");
      }
    }
    get_if(t, "model_path", cfg.model_path);
    if (t.contains("synthetic")) {
      const json& s = t.at("synthetic");
      check_known_keys(s,
                       {"dest_scale_steps", "base_fare", "per_mile", "surge",
                        "surge_windows", "trips_per_bucket", "demand_by_hour",
                        "seed"},
                       "trips.synthetic");
      get_if(s, "dest_scale_steps", cfg.synth.dest_scale_steps);
      get_if(s, "base_fare", cfg.synth.base_fare);
      get_if(s, "per_mile", cfg.synth.per_mile);
      get_if(s, "surge", cfg.synth.surge);
      if (s.contains("surge_windows")) {
        cfg.synth.surge_windows =
            windows_from_json(s.at("surge_windows"), "trips.synthetic.surge_windows");
      }
      get_if(s, "trips_per_bucket", cfg.synth.trips_per_bucket);
      if (s.contains("demand_by_hour")) {
        cfg.synth.demand_by_hour =
            hours_array(s.at("demand_by_hour"), "trips.synthetic.demand_by_hour");
      }
      get_if(s, "seed", cfg.synth.seed);
    }
  }

  if (doc.contains("train")) {
    const json& tr = doc.at("train");
    check_known_keys(tr,
                     {"discount", "batch_size", "kl_limit", "surrogate_epochs",
                      "policy_lr", "value_lr", "value_epochs", "episodes",
                      "workers", "seed"},
                     "train");
    get_if(tr, "discount", cfg.learner.discount);
    get_if(tr, "batch_size", cfg.learner.batch_size);
    get_if(tr, "kl_limit", cfg.learner.kl_limit);
    get_if(tr, "surrogate_epochs", cfg.learner.surrogate_epochs);
    get_if(tr, "policy_lr", cfg.learner.policy_lr);
    get_if(tr, "value_lr", cfg.learner.value_lr);
    get_if(tr, "value_epochs", cfg.learner.value_epochs);
    get_if(tr, "episodes", cfg.learner.episodes);
    get_if(tr, "workers", cfg.learner.workers);
    get_if(tr, "seed", cfg.learner.seed);
  }

  return cfg;
}

SimConfig SimConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("config JSON: ") + e.what());
  }
  return from_json(doc);
}

json SimConfig::to_json() const {
  json stations_json = json::array();
  for (const auto& st : stations) {
    stations_json.push_back({{"zone", st.zone},
                             {"power_kw", st.power_kw},
                             {"queue", queue_to_json(st.queue)}});
  }
  return json{
      {"grid",
       {{"rows", grid.rows},
        {"cols", grid.cols},
        {"bbox", {grid.min_lon, grid.min_lat, grid.max_lon, grid.max_lat}},
        {"cell_miles", grid.cell_miles}}},
      {"world",
       {{"battery_kwh", battery_kwh},
        {"charge_kw", charge_kw},
        {"consumption_kwh_per_mile", consumption_kwh_per_mile},
        {"price_by_hour", schedule.price_per_kwh},
        {"emissions_by_hour", schedule.emissions_kg_per_kwh},
        {"queue", queue_to_json(default_queue)},
        {"stations", stations.empty() ? json() : stations_json},
        {"speeds",
         {{"offpeak_mph", speeds.offpeak_mph},
          {"peak_mph", speeds.peak_mph},
          {"peak_windows", windows_to_json(speeds.peak_windows)}}}}},
      {"env",
       {{"emissions_weight", emissions_weight},
        {"horizon_min", horizon_min},
        {"reserve_kwh", reserve_kwh},
        {"start_zone", start_zone},
        {"seed", env_seed}}},
      {"trips",
       {{"source", trip_source == TripSource::Synthetic ? "synthetic" : "file"},
        {"model_path", model_path},
        {"synthetic",
         {{"dest_scale_steps", synth.dest_scale_steps},
          {"base_fare", synth.base_fare},
          {"per_mile", synth.per_mile},
          {"surge", synth.surge},
          {"surge_windows", windows_to_json(synth.surge_windows)},
          {"trips_per_bucket", synth.trips_per_bucket},
          {"demand_by_hour", synth.demand_by_hour},
          {"seed", synth.seed}}}}},
      {"train",
       {{"discount", learner.discount},
        {"batch_size", learner.batch_size},
        {"kl_limit", learner.kl_limit},
        {"surrogate_epochs", learner.surrogate_epochs},
        {"policy_lr", learner.policy_lr},
        {"value_lr", learner.value_lr},
        {"value_epochs", learner.value_epochs},
        {"episodes", learner.episodes},
        {"workers", learner.workers},
        {"seed", learner.seed}}},
  };
}

void SimConfig::set_override(const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw InvalidConfigError("override must look like section.key=value: " +
                             assignment);
  }
  std::string path = assignment.substr(0, eq);
  std::string raw = assignment.substr(eq + 1);

  json doc = to_json();
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = path.find('.', start);
    std::string key = path.substr(start, dot - start);
    if (!node->is_object() || !node->contains(key)) {
      throw InvalidConfigError("unknown config key '" + path + "'");
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // bare strings are allowed unquoted
  }
  *node = value;
  *this = from_json(doc);
}

ChargingNetwork SimConfig::build_network() const {
  if (stations.empty()) {
    return ChargingNetwork::evenly_spread(grid, charge_kw, default_queue);
  }
  return ChargingNetwork{stations};
}

std::shared_ptr<const TripModel> SimConfig::build_trips() const {
  if (trip_source == TripSource::File) {
    if (model_path.empty()) {
      throw InvalidConfigError("trips.source is 'file' but model_path is empty");
    }
    return std::make_shared<const TripModel>(load_model(model_path));
  }
  return std::make_shared<const TripModel>(
      synthetic_model(grid, synth, speeds));
}

EnvConfig SimConfig::build_env(std::shared_ptr<const TripModel> trips) const {
  EnvConfig env;
  env.battery_kwh = battery_kwh;
  env.consumption_kwh_per_mile = consumption_kwh_per_mile;
  env.emissions_weight = emissions_weight;
  env.horizon_min = horizon_min;
  env.reserve_kwh = reserve_kwh;
  env.start_zone = start_zone;
  env.seed = env_seed;
  env.grid = grid;
  env.schedule = schedule;
  env.network = build_network();
  env.speeds = speeds;
  env.trips = std::move(trips);
  return env;
}

}  // namespace evsim
