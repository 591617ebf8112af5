#pragma once

#include <cstdint>
#include <string>

#include "lbs/geomath.hpp"

namespace lbs::geohash {

/// Integer cell coordinates of the geohash grid at a given precision.
/// Column `x` counts longitude cells eastward from -180; row `y` counts
/// latitude cells northward from -90.
struct Cell {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Grid geometry for a precision of `chars` base-32 characters.
class Grid {
 public:
  explicit Grid(int chars);

  int precision() const { return chars_; }
  std::int64_t columns() const { return std::int64_t{1} << lon_bits_; }
  std::int64_t rows() const { return std::int64_t{1} << lat_bits_; }
  double cell_width_deg() const { return 360.0 / static_cast<double>(columns()); }
  double cell_height_deg() const { return 180.0 / static_cast<double>(rows()); }

  Cell cell_of(const geo::GeoPoint& p) const;
  std::string encode(const Cell& c) const;
  std::string encode(const geo::GeoPoint& p) const { return encode(cell_of(p)); }

  double west_of(std::int64_t x) const { return -180.0 + x * cell_width_deg(); }
  double south_of(std::int64_t y) const { return -90.0 + y * cell_height_deg(); }

 private:
  int chars_;
  int lon_bits_;
  int lat_bits_;
};

/// Standard geohash of a point (same result as Grid(chars).encode(p)).
std::string encode(const geo::GeoPoint& p, int chars);

/// Center of the cell named by a geohash string.
geo::GeoPoint decode(const std::string& hash);

}  // namespace lbs::geohash
