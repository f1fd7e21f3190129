#include "evsim/timeutil.hpp"

#include <cmath>
#include <cstdio>

#include "evsim/errors.hpp"

namespace evsim {

double minute_of_day(double clock_min) {
  double m = std::fmod(clock_min, kMinutesPerDay);
  if (m < 0) m += kMinutesPerDay;
  return m;
}

int hour_of_day(double clock_min) {
  int h = static_cast<int>(minute_of_day(clock_min) / kMinutesPerHour);
  return h > 23 ? 23 : h;
}

namespace {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

}  // namespace

std::int64_t parse_timestamp_seconds(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char tail = 0;
  std::string buf(text);
  int n = std::sscanf(buf.c_str(), "%4d-%2d-%2d %2d:%2d:%2d%c",
                      &y, &mo, &d, &h, &mi, &s, &tail);
  if (n != 6) {
    throw ParseError("bad timestamp: '" + buf + "'");
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 ||
      mi < 0 || mi > 59 || s < 0 || s > 60) {
    throw ParseError("timestamp field out of range: '" + buf + "'");
  }
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s;
}

int timestamp_hour(std::int64_t seconds) {
  std::int64_t sod = seconds % 86400;
  if (sod < 0) sod += 86400;
  return static_cast<int>(sod / 3600);
}

}  // namespace evsim
