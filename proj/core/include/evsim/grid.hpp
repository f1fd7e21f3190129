#pragma once

namespace evsim {

// Rectangular zone grid over a lon/lat bounding box. Zones are numbered
// row-major: zone = row * cols + col, row 0 at min_lat, col 0 at min_lon.
struct ZoneGrid {
  int rows = 10;
  int cols = 12;
  double min_lon = -74.03;
  double min_lat = 40.68;
  double max_lon = -73.90;
  double max_lat = 40.88;
  double cell_miles = 0.5;

  int zone_count() const { return rows * cols; }
  int row_of(int zone) const { return zone / cols; }
  int col_of(int zone) const { return zone % cols; }
  int zone_at(int row, int col) const { return row * cols + col; }
  int center_zone() const { return zone_at(rows / 2, cols / 2); }
  bool valid_zone(int zone) const { return zone >= 0 && zone < zone_count(); }

  int manhattan(int zone_a, int zone_b) const;
  double miles_between(int zone_a, int zone_b) const {
    return manhattan(zone_a, zone_b) * cell_miles;
  }

  // Bins a point into its zone. Min edges are inclusive, max edges map to the
  // last row/column. Throws OutOfBoundsError outside the bounding box.
  int locate(double lon, double lat) const;

  bool contains(double lon, double lat) const {
    return lon >= min_lon && lon <= max_lon && lat >= min_lat && lat <= max_lat;
  }

  // Throws InvalidConfigError if dimensions or bbox are degenerate.
  void validate() const;
};

}  // namespace evsim
