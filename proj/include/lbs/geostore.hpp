#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lbs/geohash.hpp"
#include "lbs/localization.hpp"

namespace lbs::geostore {

inline constexpr double kMaxQueryRadius = 50'000.0;

struct PresenceRecord {
  std::string user_id;
  loc::Fix fix;
  bool online = false;
  Millis updated_at = 0;

  friend bool operator==(const PresenceRecord&, const PresenceRecord&) = default;
};

struct Neighbor {
  PresenceRecord record;
  double distance = 0.0;  // meters from the query center
};

enum class PoiCategory { Restaurant, Hospital, Bank, Other };
std::string_view to_string(PoiCategory c);
/// Case-insensitive; anything unrecognized maps to Other.
PoiCategory poi_category_from_string(std::string_view s);

struct Poi {
  std::string poi_id;
  std::string name;
  PoiCategory category = PoiCategory::Other;
  geo::GeoPoint position;

  friend bool operator==(const Poi&, const Poi&) = default;
};

struct PoiHit {
  Poi poi;
  double distance = 0.0;
};

struct PoiFilter {
  std::optional<PoiCategory> category;
  std::optional<std::string> name_contains;  // case-insensitive
};

/// Bucket index from ids to positions keyed by geohash cell.
class CellIndex {
 public:
  explicit CellIndex(int precision) : grid_(precision) {}

  const geohash::Grid& grid() const { return grid_; }
  /// Inserts or moves `id`; an id lives in exactly one bucket.
  void put(const std::string& id, const geo::GeoPoint& p);
  bool erase(const std::string& id);
  std::size_t size() const { return cell_of_.size(); }

  /// Ids whose cell intersects the bounding box of the disc. A superset of
  /// the ids inside the disc.
  std::vector<std::string> candidates(const geo::GeoPoint& center, double radius) const;

  /// Ids in the (2r+1)x(2r+1) ring of cells at Chebyshev distance exactly
  /// `ring` from `center`'s cell.
  std::vector<std::string> ring(const geohash::Cell& center, std::int64_t ring) const;

  /// True when every cell within Chebyshev distance `rings` of `center`
  /// covers the bounding box of the given disc.
  bool covers(const geohash::Cell& center, std::int64_t rings, const geo::GeoPoint& c,
              double radius) const;

  /// Each id appears in exactly one bucket, and that bucket matches its cell.
  bool audit(const std::map<std::string, geo::GeoPoint>& positions) const;

  std::vector<std::string> all_ids() const;

 private:
  void collect(std::int64_t x, std::int64_t y, std::vector<std::string>& out) const;

  geohash::Grid grid_;
  std::unordered_map<std::string, std::set<std::string>> buckets_;
  std::unordered_map<std::string, std::string> cell_of_;
};

/// Spatial store of current user positions and static points of interest.
/// Readers run concurrently; writers are serialized.
class GeoStore {
 public:
  explicit GeoStore(int precision = 6);

  int precision() const { return users_.grid().precision(); }

  /// Throws StaleUpdate when `fix` is older than the stored one.
  std::optional<loc::Fix> upsert_position(const std::string& user_id, const loc::Fix& fix);
  bool set_online(const std::string& user_id, bool online);
  bool remove(const std::string& user_id);

  std::optional<PresenceRecord> get(const std::string& user_id) const;
  std::size_t size() const;

  /// Closed-ball query sorted by (distance, user_id).
  std::vector<Neighbor> query_radius(const geo::GeoPoint& center, double radius,
                                     bool online_only = false) const;
  std::vector<Neighbor> query_knn(const geo::GeoPoint& center, std::size_t k) const;

  void add_poi(const Poi& poi);
  /// Tab-separated: poi_id, name, category, lat, lon. Returns count loaded.
  std::size_t load_pois(const std::filesystem::path& path);
  std::vector<PoiHit> search_poi(const geo::GeoPoint& center, double radius,
                                 const PoiFilter& filter = {}) const;
  std::size_t poi_count() const;

  /// Internal consistency check of both indexes.
  bool audit() const;

  /// All records ordered by user_id.
  std::vector<PresenceRecord> records() const;
  void restore(const std::vector<PresenceRecord>& records);

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, PresenceRecord> records_;
  CellIndex users_;
  std::map<std::string, Poi> pois_;
  CellIndex poi_index_;
};

}  // namespace lbs::geostore
