#pragma once

#include <cstdint>
#include <string_view>

namespace evsim {

constexpr double kMinutesPerDay = 1440.0;
constexpr double kMinutesPerHour = 60.0;

// Minute-of-day in [0, 1440) for a clock in minutes; wraps, handles negatives.
double minute_of_day(double clock_min);

// Hour-of-day in [0, 24) for a clock in minutes.
int hour_of_day(double clock_min);

// Parses "YYYY-MM-DD HH:MM:SS" into seconds since a fixed civil epoch.
// Throws ParseError on malformed input or out-of-range fields.
std::int64_t parse_timestamp_seconds(std::string_view text);

// Hour-of-day (0..23) of a parsed timestamp.
int timestamp_hour(std::int64_t seconds);

}  // namespace evsim
