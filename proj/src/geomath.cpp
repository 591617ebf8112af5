#include "lbs/geomath.hpp"

#include <algorithm>
#include <string>

#include "lbs/error.hpp"

namespace lbs::geo {

double normalize_lon(double lon) {
  double r = std::fmod(lon, 360.0);
  if (r <= -180.0) r += 360.0;
  if (r > 180.0) r -= 360.0;
  return r;
}

GeoPoint GeoPoint::make(double lat, double lon) {
  if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 || lat > 90.0) {
    throw Error(ErrorCode::InvalidCoordinate,
                "invalid coordinate (" + std::to_string(lat) + ", " + std::to_string(lon) + ")");
  }
  return GeoPoint{lat, normalize_lon(lon)};
}

bool GeoPoint::valid() const {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 &&
         lon > -180.0 && lon <= 180.0;
}

double haversine(const GeoPoint& a, const GeoPoint& b) {
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dphi = phi2 - phi1;
  const double dlambda = deg2rad(normalize_lon(b.lon - a.lon));
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadius * std::asin(std::sqrt(h));
}

bool BoundingBox::contains(const GeoPoint& p) const {
  if (p.lat < south || p.lat > north) return false;
  if (wraps()) return p.lon >= west || p.lon <= east;
  return p.lon >= west && p.lon <= east;
}

BoundingBox BoundingBox::around(const GeoPoint& center, double radius) {
  const double dlat = rad2deg(radius / kEarthRadius);
  BoundingBox box;
  box.south = std::max(-90.0, center.lat - dlat);
  box.north = std::min(90.0, center.lat + dlat);
  if (center.lat - dlat <= -90.0 || center.lat + dlat >= 90.0) {
    box.west = -180.0;
    box.east = 180.0;
    return box;
  }
  // Widest longitude extent of a spherical cap about a non-polar center.
  const double ratio = std::sin(radius / kEarthRadius) / std::cos(deg2rad(center.lat));
  if (ratio >= 1.0) {
    box.west = -180.0;
    box.east = 180.0;
    return box;
  }
  const double dlon = rad2deg(std::asin(ratio));
  if (dlon >= 180.0) {
    box.west = -180.0;
    box.east = 180.0;
    return box;
  }
  box.west = normalize_lon(center.lon - dlon);
  box.east = normalize_lon(center.lon + dlon);
  if (box.west == 180.0) box.west = -180.0;
  return box;
}

EnuPoint to_enu(const GeoPoint& origin, const GeoPoint& p) {
  if (haversine(origin, p) >= kMaxProjectionRange) {
    throw Error(ErrorCode::OutOfProjectionRange, "point is 100 km or more from projection origin");
  }
  const double mean_lat = deg2rad((origin.lat + p.lat) / 2.0);
  return EnuPoint{
      kEarthRadius * deg2rad(normalize_lon(p.lon - origin.lon)) * std::cos(mean_lat),
      kEarthRadius * deg2rad(p.lat - origin.lat),
  };
}

GeoPoint from_enu(const GeoPoint& origin, const EnuPoint& e) {
  const double lat = origin.lat + rad2deg(e.north / kEarthRadius);
  const double mean_lat = deg2rad((origin.lat + lat) / 2.0);
  const double lon = origin.lon + rad2deg(e.east / (kEarthRadius * std::cos(mean_lat)));
  return GeoPoint{lat, normalize_lon(lon)};
}

}  // namespace lbs::geo
