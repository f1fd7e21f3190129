#include "evsim/grid.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "evsim/errors.hpp"

namespace evsim {

int ZoneGrid::manhattan(int zone_a, int zone_b) const {
  return std::abs(row_of(zone_a) - row_of(zone_b)) +
         std::abs(col_of(zone_a) - col_of(zone_b));
}

int ZoneGrid::locate(double lon, double lat) const {
  if (!contains(lon, lat)) {
    throw OutOfBoundsError("point (" + std::to_string(lon) + ", " +
                           std::to_string(lat) + ") outside grid bbox");
  }
  int col = static_cast<int>((lon - min_lon) / (max_lon - min_lon) * cols);
  int row = static_cast<int>((lat - min_lat) / (max_lat - min_lat) * rows);
  if (col >= cols) col = cols - 1;
  if (row >= rows) row = rows - 1;
  return zone_at(row, col);
}

void ZoneGrid::validate() const {
  if (rows <= 0 || cols <= 0) {
    throw InvalidConfigError("grid rows and cols must be positive");
  }
  if (cell_miles <= 0) {
    throw InvalidConfigError("grid cell_miles must be positive");
  }
  if (max_lon <= min_lon || max_lat <= min_lat) {
    throw InvalidConfigError("grid bbox must have positive width and height");
  }
}

}  // namespace evsim
