#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lbs/geomath.hpp"

namespace lbs::gateway {

struct GazetteerEntry {
  std::string city;
  std::string country;
  geo::GeoPoint centroid;
};

class Gazetteer {
 public:
  /// Tab-separated city, country, lat, lon. Returns entries loaded.
  std::size_t load(const std::filesystem::path& path);
  /// Throws InvalidField on a duplicate (city, country) pair.
  void add(const GazetteerEntry& e);

  /// "City, Country": exactly one comma, both parts non-empty after
  /// trimming, case-insensitive. Throws MalformedQuery or UnknownCity.
  const GazetteerEntry& geocode(const std::string& query) const;
  const GazetteerEntry* find(const std::string& city, const std::string& country) const;
  /// Closest entry within `max_distance` meters.
  const GazetteerEntry* nearest(const geo::GeoPoint& p, double max_distance) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<GazetteerEntry> entries_;
};

}  // namespace lbs::gateway
