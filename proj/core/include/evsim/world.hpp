#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "evsim/grid.hpp"
#include "evsim/trips.hpp"

namespace evsim {

struct Battery {
  double capacity_kwh = 100.0;
  double level_kwh = 100.0;

  double fraction() const { return level_kwh / capacity_kwh; }
  double deficit_kwh() const { return capacity_kwh - level_kwh; }

  // Removes up to `kwh`, never below empty; returns the amount removed.
  double drain(double kwh);
  void fill() { level_kwh = capacity_kwh; }

  void validate() const;
};

// Hourly time-of-use tables; lookups wrap modulo 24 h.
struct GridSchedule {
  std::array<double, 24> price_per_kwh{};
  std::array<double, 24> emissions_kg_per_kwh{};

  static GridSchedule defaults();
  double max_price() const;
  double max_emissions() const;
  void validate() const;
};

double price_at(const GridSchedule& schedule, double clock_min);
double emissions_at(const GridSchedule& schedule, double clock_min);

struct QueuePeak {
  double center_h = 0;
  double amp_min = 0;
  double width_h = 1;
};

struct QueueProfile {
  double base_min = 5.0;
  std::vector<QueuePeak> peaks{{8.5, 25.0, 1.5}, {18.0, 25.0, 1.5}};

  double max_wait_bound() const;  // base + sum of amplitudes
  void validate() const;
};

struct ChargingStation {
  int zone = 0;
  double power_kw = 100.0;
  QueueProfile queue;
};

// Deterministic expected queueing time, in minutes, at hour-of-day h:
// base + sum over peaks of amp * exp(-((h - center) / width)^2).
double queue_wait(const ChargingStation& station, double clock_min);

struct ChargingNetwork {
  std::vector<ChargingStation> stations;

  // 12 stations at the centers of a 3x4 partition of the grid.
  static ChargingNetwork evenly_spread(const ZoneGrid& grid,
                                       double power_kw = 100.0,
                                       QueueProfile queue = {});

  // Index of the station minimizing Manhattan grid distance; ties go to the
  // lowest index. Throws InvalidConfigError if the network is empty.
  int nearest(int zone, const ZoneGrid& grid) const;

  void validate(const ZoneGrid& grid) const;
};

struct ChargingSession {
  int station = -1;
  double start_min = 0;    // arrival at the station
  double wait_min = 0;
  double charge_min = 0;
  double energy_kwh = 0;
  double cost_usd = 0;
  double emissions_kg = 0;

  double end_min() const { return start_min + wait_min + charge_min; }
};

// Queues, then charges the battery to full starting at `clock_min`. Cost and
// emissions are exact piecewise-constant integrals of the hourly tables over
// the charging span. A full battery yields a zero-energy session that still
// pays the queue wait. Mutates `battery` to full.
ChargingSession charge_session(Battery& battery, const ChargingStation& station,
                               int station_index, double clock_min,
                               const GridSchedule& schedule);

double ride_energy(const TripRequest& trip, double kwh_per_mile);

// Driving speed by time of day; peak windows are [start, end) hours.
struct Speeds {
  double offpeak_mph = 12.0;
  double peak_mph = 8.0;
  std::vector<std::pair<int, int>> peak_windows{{7, 10}, {16, 19}};

  bool in_peak(int hour) const;
  double mph_at(double clock_min) const;
  void validate() const;
};

}  // namespace evsim
