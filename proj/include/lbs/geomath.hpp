#pragma once

#include <cmath>
#include <numbers>

namespace lbs::geo {

inline constexpr double kEarthRadius = 6'371'000.0;  // meters, spherical model
inline constexpr double kMaxProjectionRange = 100'000.0;

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

/// Normalizes a longitude into (-180, 180].
double normalize_lon(double lon);

/// WGS84 position in degrees. Construct through `make` to get validation
/// and longitude normalization; aggregate init is for trusted values.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  /// Throws Error{InvalidCoordinate} outside [-90,90] or for non-finite input.
  static GeoPoint make(double lat, double lon);

  bool valid() const;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Planar coordinates in a local tangent frame around some origin.
struct EnuPoint {
  double east = 0.0;
  double north = 0.0;

  double norm() const { return std::hypot(east, north); }
  friend bool operator==(const EnuPoint&, const EnuPoint&) = default;
};

struct BoundingBox {
  double south = 0.0;
  double west = 0.0;
  double north = 0.0;
  double east = 0.0;

  /// True when the box crosses the antimeridian (west > east).
  bool wraps() const { return west > east; }
  bool contains(const GeoPoint& p) const;

  /// Smallest box containing the closed disc of `radius` meters around
  /// `center`. Discs reaching a pole span all longitudes.
  static BoundingBox around(const GeoPoint& center, double radius);
};

/// Great-circle distance in meters.
double haversine(const GeoPoint& a, const GeoPoint& b);

/// Equirectangular projection about `origin`, scaled by the cosine of the mean
/// latitude of the two points. Throws OutOfProjectionRange when `p` is
/// 100 km or more from `origin`.
EnuPoint to_enu(const GeoPoint& origin, const GeoPoint& p);
GeoPoint from_enu(const GeoPoint& origin, const EnuPoint& e);

/// Mean position of a set of points, robust to antimeridian wrap when the
/// points are within a hemisphere of the first one.
template <typename Range>
GeoPoint centroid(const Range& points) {
  double lat = 0.0, dlon = 0.0;
  std::size_t n = 0;
  GeoPoint first{};
  for (const GeoPoint& p : points) {
    if (n == 0) first = p;
    lat += p.lat;
    dlon += normalize_lon(p.lon - first.lon);
    ++n;
  }
  if (n == 0) return {};
  return GeoPoint{lat / n, normalize_lon(first.lon + dlon / n)};
}

}  // namespace lbs::geo
