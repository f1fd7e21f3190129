#include "evsim/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "evsim/errors.hpp"
#include "evsim/timeutil.hpp"

namespace evsim {

double Battery::drain(double kwh) {
  double taken = std::min(kwh, level_kwh);
  level_kwh -= taken;
  return taken;
}

void Battery::validate() const {
  if (capacity_kwh <= 0) {
    throw InvalidConfigError("battery capacity must be positive");
  }
  if (level_kwh < 0 || level_kwh > capacity_kwh) {
    throw InvalidConfigError("battery level outside [0, capacity]");
  }
}

GridSchedule GridSchedule::defaults() {
  GridSchedule s;
  auto fill = [](std::array<double, 24>& t, int lo, int hi, double v) {
    for (int h = lo; h <= hi; ++h) t[h] = v;
  };
  fill(s.price_per_kwh, 0, 5, 0.08);
  fill(s.price_per_kwh, 6, 8, 0.12);
  fill(s.price_per_kwh, 9, 11, 0.10);
  fill(s.price_per_kwh, 12, 13, 0.07);
  fill(s.price_per_kwh, 14, 15, 0.10);
  fill(s.price_per_kwh, 16, 20, 0.22);
  fill(s.price_per_kwh, 21, 23, 0.10);
  fill(s.emissions_kg_per_kwh, 0, 5, 0.35);
  fill(s.emissions_kg_per_kwh, 6, 8, 0.30);
  fill(s.emissions_kg_per_kwh, 9, 15, 0.15);
  fill(s.emissions_kg_per_kwh, 16, 20, 0.40);
  fill(s.emissions_kg_per_kwh, 21, 23, 0.32);
  return s;
}

double GridSchedule::max_price() const {
  return *std::max_element(price_per_kwh.begin(), price_per_kwh.end());
}

double GridSchedule::max_emissions() const {
  return *std::max_element(emissions_kg_per_kwh.begin(),
                           emissions_kg_per_kwh.end());
}

void GridSchedule::validate() const {
  for (double p : price_per_kwh) {
    if (!(p >= 0)) throw InvalidConfigError("price table entries must be >= 0");
  }
  for (double e : emissions_kg_per_kwh) {
    if (!(e >= 0)) {
      throw InvalidConfigError("emissions table entries must be >= 0");
    }
  }
}

double price_at(const GridSchedule& schedule, double clock_min) {
  return schedule.price_per_kwh[hour_of_day(clock_min)];
}

double emissions_at(const GridSchedule& schedule, double clock_min) {
  return schedule.emissions_kg_per_kwh[hour_of_day(clock_min)];
}

double QueueProfile::max_wait_bound() const {
  double bound = base_min;
  for (const auto& p : peaks) bound += p.amp_min;
  return bound;
}

void QueueProfile::validate() const {
  if (base_min < 0) throw InvalidConfigError("queue base_min must be >= 0");
  for (const auto& p : peaks) {
    if (p.amp_min < 0) throw InvalidConfigError("queue amp_min must be >= 0");
    if (p.width_h <= 0) throw InvalidConfigError("queue width_h must be > 0");
  }
}

double queue_wait(const ChargingStation& station, double clock_min) {
  double h = minute_of_day(clock_min) / kMinutesPerHour;
  double wait = station.queue.base_min;
  for (const auto& p : station.queue.peaks) {
    double z = (h - p.center_h) / p.width_h;
    wait += p.amp_min * std::exp(-z * z);
  }
  return wait;
}

ChargingNetwork ChargingNetwork::evenly_spread(const ZoneGrid& grid,
                                               double power_kw,
                                               QueueProfile queue) {
  constexpr int kRowBlocks = 3;
  constexpr int kColBlocks = 4;
  ChargingNetwork net;
  for (int rb = 0; rb < kRowBlocks; ++rb) {
    for (int cb = 0; cb < kColBlocks; ++cb) {
      int row = static_cast<int>((rb + 0.5) * grid.rows / kRowBlocks);
      int col = static_cast<int>((cb + 0.5) * grid.cols / kColBlocks);
      net.stations.push_back({grid.zone_at(row, col), power_kw, queue});
    }
  }
  return net;
}

int ChargingNetwork::nearest(int zone, const ZoneGrid& grid) const {
  if (stations.empty()) {
    throw InvalidConfigError("charging network has no stations");
  }
  int best = 0;
  int best_dist = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < stations.size(); ++i) {
    int d = grid.manhattan(zone, stations[i].zone);
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

void ChargingNetwork::validate(const ZoneGrid& grid) const {
  if (stations.empty()) {
    throw InvalidConfigError("charging network must be non-empty");
  }
  std::set<int> zones;
  for (const auto& st : stations) {
    if (!grid.valid_zone(st.zone)) {
      throw InvalidConfigError("station zone " + std::to_string(st.zone) +
                               " outside grid");
    }
    if (st.power_kw <= 0) {
      throw InvalidConfigError("station power must be positive");
    }
    st.queue.validate();
    if (!zones.insert(st.zone).second) {
      throw InvalidConfigError("duplicate station zone " +
                               std::to_string(st.zone));
    }
  }
}

namespace {

// Integrates kWh * table over [start, start + duration), splitting at hourly
// boundaries where the table is constant.
double integrate_hourly(const std::array<double, 24>& table, double power_kw,
                        double start_min, double duration_min) {
  double total = 0;
  double a = start_min;
  const double end = start_min + duration_min;
  while (a < end) {
    double boundary = (std::floor(a / kMinutesPerHour) + 1) * kMinutesPerHour;
    double b = std::min(end, boundary);
    total += power_kw * (b - a) / kMinutesPerHour * table[hour_of_day(a)];
    if (b <= a) break;  // guards against fp stalls on tiny segments
    a = b;
  }
  return total;
}

}  // namespace

ChargingSession charge_session(Battery& battery, const ChargingStation& station,
                               int station_index, double clock_min,
                               const GridSchedule& schedule) {
  ChargingSession s;
  s.station = station_index;
  s.start_min = clock_min;
  s.wait_min = queue_wait(station, clock_min);
  s.energy_kwh = battery.deficit_kwh();
  s.charge_min = s.energy_kwh / station.power_kw * kMinutesPerHour;
  double charge_start = clock_min + s.wait_min;
  s.cost_usd = integrate_hourly(schedule.price_per_kwh, station.power_kw,
                                charge_start, s.charge_min);
  s.emissions_kg = integrate_hourly(schedule.emissions_kg_per_kwh,
                                    station.power_kw, charge_start,
                                    s.charge_min);
  battery.fill();
  return s;
}

double ride_energy(const TripRequest& trip, double kwh_per_mile) {
  if (kwh_per_mile <= 0) {
    throw InvalidParamsError("consumption must be positive");
  }
  return trip.distance_mi * kwh_per_mile;
}

bool Speeds::in_peak(int hour) const {
  for (const auto& [lo, hi] : peak_windows) {
    if (hour >= lo && hour < hi) return true;
  }
  return false;
}

double Speeds::mph_at(double clock_min) const {
  return in_peak(hour_of_day(clock_min)) ? peak_mph : offpeak_mph;
}

void Speeds::validate() const {
  if (offpeak_mph <= 0 || peak_mph <= 0) {
    throw InvalidConfigError("speeds must be positive");
  }
}

}  // namespace evsim
