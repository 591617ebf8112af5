#include "lbs/geostore.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <mutex>
#include <sstream>

namespace lbs::geostore {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

bool by_distance_then_id(const Neighbor& a, const Neighbor& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.record.user_id < b.record.user_id;
}

void check_radius(double radius) {
  if (!(radius > 0.0 && radius <= kMaxQueryRadius)) {
    throw Error(ErrorCode::RadiusOutOfRange, "radius must be in (0, 50000] meters");
  }
}

std::int64_t wrap(std::int64_t x, std::int64_t n) { return ((x % n) + n) % n; }

}  // namespace

std::string_view to_string(PoiCategory c) {
  switch (c) {
    case PoiCategory::Restaurant: return "Restaurant";
    case PoiCategory::Hospital: return "Hospital";
    case PoiCategory::Bank: return "Bank";
    case PoiCategory::Other: return "Other";
  }
  return "Other";
}

PoiCategory poi_category_from_string(std::string_view s) {
  const auto l = lower(s);
  if (l == "restaurant") return PoiCategory::Restaurant;
  if (l == "hospital") return PoiCategory::Hospital;
  if (l == "bank") return PoiCategory::Bank;
  return PoiCategory::Other;
}

// ---------------------------------------------------------------------------

void CellIndex::put(const std::string& id, const geo::GeoPoint& p) {
  auto key = grid_.encode(p);
  auto it = cell_of_.find(id);
  if (it != cell_of_.end()) {
    if (it->second == key) return;
    auto& old = buckets_[it->second];
    old.erase(id);
    if (old.empty()) buckets_.erase(it->second);
    it->second = key;
  } else {
    cell_of_.emplace(id, key);
  }
  buckets_[key].insert(id);
}

bool CellIndex::erase(const std::string& id) {
  auto it = cell_of_.find(id);
  if (it == cell_of_.end()) return false;
  auto b = buckets_.find(it->second);
  b->second.erase(id);
  if (b->second.empty()) buckets_.erase(b);
  cell_of_.erase(it);
  return true;
}

void CellIndex::collect(std::int64_t x, std::int64_t y, std::vector<std::string>& out) const {
  auto it = buckets_.find(grid_.encode(geohash::Cell{x, y}));
  if (it == buckets_.end()) return;
  out.insert(out.end(), it->second.begin(), it->second.end());
}

std::vector<std::string> CellIndex::all_ids() const {
  std::vector<std::string> out;
  out.reserve(cell_of_.size());
  for (const auto& [id, cell] : cell_of_) out.push_back(id);
  return out;
}

std::vector<std::string> CellIndex::candidates(const geo::GeoPoint& center, double radius) const {
  const auto box = geo::BoundingBox::around(center, radius);
  const auto lo = grid_.cell_of({box.south, box.west});
  const auto hi = grid_.cell_of({box.north, box.east});
  const std::int64_t rows = hi.y - lo.y + 1;

  std::vector<std::pair<std::int64_t, std::int64_t>> col_ranges;
  if (box.west <= -180.0 && box.east >= 180.0) {
    col_ranges.emplace_back(0, grid_.columns() - 1);
  } else if (box.wraps()) {
    col_ranges.emplace_back(lo.x, grid_.columns() - 1);
    col_ranges.emplace_back(0, hi.x);
  } else {
    col_ranges.emplace_back(lo.x, hi.x);
  }
  std::int64_t cols = 0;
  for (const auto& [a, b] : col_ranges) cols += b - a + 1;

  // Scanning buckets beats enumerating a sparse grid.
  if (rows * cols > static_cast<std::int64_t>(4 * buckets_.size() + 64)) {
    std::vector<std::string> out;
    for (const auto& [key, ids] : buckets_) {
      const auto mid = geohash::decode(key);
      const auto cell = grid_.cell_of(mid);
      if (cell.y < lo.y || cell.y > hi.y) continue;
      bool in_cols = false;
      for (const auto& [a, b] : col_ranges) in_cols |= (cell.x >= a && cell.x <= b);
      if (in_cols) out.insert(out.end(), ids.begin(), ids.end());
    }
    return out;
  }

  std::vector<std::string> out;
  for (std::int64_t y = lo.y; y <= hi.y; ++y) {
    for (const auto& [a, b] : col_ranges) {
      for (std::int64_t x = a; x <= b; ++x) collect(x, y, out);
    }
  }
  return out;
}

std::vector<std::string> CellIndex::ring(const geohash::Cell& c, std::int64_t r) const {
  std::vector<std::string> out;
  const std::int64_t n = grid_.columns();
  auto visit = [&](std::int64_t x, std::int64_t y) {
    if (y < 0 || y >= grid_.rows()) return;
    collect(wrap(x, n), y, out);
  };
  if (r == 0) {
    visit(c.x, c.y);
    return out;
  }
  for (std::int64_t dx = -r; dx <= r; ++dx) {
    visit(c.x + dx, c.y - r);
    visit(c.x + dx, c.y + r);
  }
  for (std::int64_t dy = -r + 1; dy <= r - 1; ++dy) {
    visit(c.x - r, c.y + dy);
    visit(c.x + r, c.y + dy);
  }
  return out;
}

bool CellIndex::covers(const geohash::Cell& cc, std::int64_t rings, const geo::GeoPoint& c,
                       double radius) const {
  const auto box = geo::BoundingBox::around(c, radius);
  const bool south_open = cc.y - rings <= 0;
  const bool north_open = cc.y + rings >= grid_.rows() - 1;
  if (!south_open && box.south < grid_.south_of(cc.y - rings)) return false;
  if (!north_open && box.north >= grid_.south_of(cc.y + rings + 1)) return false;

  if (2 * rings + 1 >= grid_.columns()) return true;
  if (box.west <= -180.0 && box.east >= 180.0) return false;
  const double vw = grid_.west_of(cc.x - rings);
  const double ve = grid_.west_of(cc.x + rings + 1);
  double w = box.west;
  double e = box.east < box.west ? box.east + 360.0 : box.east;
  while (w < vw) {
    w += 360.0;
    e += 360.0;
  }
  while (w - 360.0 >= vw) {
    w -= 360.0;
    e -= 360.0;
  }
  return e < ve;
}

bool CellIndex::audit(const std::map<std::string, geo::GeoPoint>& positions) const {
  if (positions.size() != cell_of_.size()) return false;
  std::size_t bucketed = 0;
  for (const auto& [key, ids] : buckets_) {
    if (ids.empty()) return false;
    for (const auto& id : ids) {
      auto it = cell_of_.find(id);
      if (it == cell_of_.end() || it->second != key) return false;
    }
    bucketed += ids.size();
  }
  if (bucketed != cell_of_.size()) return false;
  for (const auto& [id, p] : positions) {
    auto it = cell_of_.find(id);
    if (it == cell_of_.end() || it->second != grid_.encode(p)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

GeoStore::GeoStore(int precision) : users_(precision), poi_index_(precision) {}

std::optional<loc::Fix> GeoStore::upsert_position(const std::string& user_id, const loc::Fix& fix) {
  if (!fix.position.valid()) throw Error(ErrorCode::InvalidCoordinate, "fix position invalid");
  std::unique_lock lock(mutex_);
  auto it = records_.find(user_id);
  if (it == records_.end()) {
    records_.emplace(user_id, PresenceRecord{user_id, fix, false, fix.timestamp});
    users_.put(user_id, fix.position);
    return std::nullopt;
  }
  if (fix.timestamp < it->second.updated_at) {
    throw Error(ErrorCode::StaleUpdate, "fix is older than the stored position");
  }
  auto previous = it->second.fix;
  it->second.fix = fix;
  it->second.updated_at = fix.timestamp;
  users_.put(user_id, fix.position);
  return previous;
}

bool GeoStore::set_online(const std::string& user_id, bool online) {
  std::unique_lock lock(mutex_);
  auto it = records_.find(user_id);
  if (it == records_.end()) return false;
  it->second.online = online;
  return true;
}

bool GeoStore::remove(const std::string& user_id) {
  std::unique_lock lock(mutex_);
  if (records_.erase(user_id) == 0) return false;
  users_.erase(user_id);
  return true;
}

std::optional<PresenceRecord> GeoStore::get(const std::string& user_id) const {
  std::shared_lock lock(mutex_);
  auto it = records_.find(user_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::size_t GeoStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

std::vector<Neighbor> GeoStore::query_radius(const geo::GeoPoint& center, double radius,
                                             bool online_only) const {
  check_radius(radius);
  std::shared_lock lock(mutex_);
  std::vector<Neighbor> out;
  for (const auto& id : users_.candidates(center, radius)) {
    const auto& rec = records_.at(id);
    if (online_only && !rec.online) continue;
    const double d = geo::haversine(center, rec.fix.position);
    if (d <= radius) out.push_back({rec, d});
  }
  std::sort(out.begin(), out.end(), by_distance_then_id);
  return out;
}

std::vector<Neighbor> GeoStore::query_knn(const geo::GeoPoint& center, std::size_t k) const {
  std::shared_lock lock(mutex_);
  std::vector<Neighbor> found;
  if (k == 0 || records_.empty()) return found;

  const auto cc = users_.grid().cell_of(center);
  const auto budget = static_cast<std::int64_t>(4 * records_.size() + 1024);
  std::int64_t visited = 0;
  std::set<std::string> seen;
  bool complete = false;
  for (std::int64_t r = 0; !complete; ++r) {
    for (const auto& id : users_.ring(cc, r)) {
      if (!seen.insert(id).second) continue;
      const auto& rec = records_.at(id);
      found.push_back({rec, geo::haversine(center, rec.fix.position)});
    }
    visited += r == 0 ? 1 : 8 * r;
    if (found.size() == records_.size()) break;
    if (found.size() >= k) {
      std::nth_element(found.begin(), found.begin() + static_cast<long>(k - 1), found.end(),
                       by_distance_then_id);
      if (users_.covers(cc, r, center, found[k - 1].distance)) break;
    }
    if (visited > budget) {
      found.clear();
      for (const auto& [id, rec] : records_) {
        found.push_back({rec, geo::haversine(center, rec.fix.position)});
      }
      complete = true;
    }
  }
  std::sort(found.begin(), found.end(), by_distance_then_id);
  if (found.size() > k) found.resize(k);
  return found;
}

void GeoStore::add_poi(const Poi& poi) {
  if (!poi.position.valid()) throw Error(ErrorCode::InvalidCoordinate, "poi position invalid");
  std::unique_lock lock(mutex_);
  pois_[poi.poi_id] = poi;
  poi_index_.put(poi.poi_id, poi.position);
}

std::size_t GeoStore::load_pois(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open POI file " + path.string());
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    if (cols.size() != 5) throw Error(ErrorCode::BadRequest, "POI line needs 5 tab-separated columns");
    add_poi(Poi{cols[0], cols[1], poi_category_from_string(cols[2]),
                geo::GeoPoint::make(std::stod(cols[3]), std::stod(cols[4]))});
    ++n;
  }
  return n;
}

std::vector<PoiHit> GeoStore::search_poi(const geo::GeoPoint& center, double radius,
                                         const PoiFilter& filter) const {
  check_radius(radius);
  const auto needle = filter.name_contains ? lower(*filter.name_contains) : std::string{};
  std::shared_lock lock(mutex_);
  std::vector<PoiHit> out;
  for (const auto& id : poi_index_.candidates(center, radius)) {
    const auto& poi = pois_.at(id);
    if (filter.category && poi.category != *filter.category) continue;
    if (filter.name_contains && lower(poi.name).find(needle) == std::string::npos) continue;
    const double d = geo::haversine(center, poi.position);
    if (d <= radius) out.push_back({poi, d});
  }
  std::sort(out.begin(), out.end(), [](const PoiHit& a, const PoiHit& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.poi.poi_id < b.poi.poi_id;
  });
  return out;
}

std::size_t GeoStore::poi_count() const {
  std::shared_lock lock(mutex_);
  return pois_.size();
}

bool GeoStore::audit() const {
  std::shared_lock lock(mutex_);
  std::map<std::string, geo::GeoPoint> users, pois;
  for (const auto& [id, rec] : records_) users.emplace(id, rec.fix.position);
  for (const auto& [id, poi] : pois_) pois.emplace(id, poi.position);
  return users_.audit(users) && poi_index_.audit(pois);
}

std::vector<PresenceRecord> GeoStore::records() const {
  std::shared_lock lock(mutex_);
  std::vector<PresenceRecord> out;
  for (const auto& [id, rec] : records_) out.push_back(rec);
  return out;
}

void GeoStore::restore(const std::vector<PresenceRecord>& records) {
  std::unique_lock lock(mutex_);
  for (const auto& [id, rec] : records_) users_.erase(id);
  records_.clear();
  for (const auto& rec : records) {
    records_[rec.user_id] = rec;
    users_.put(rec.user_id, rec.fix.position);
  }
}

}  // namespace lbs::geostore
