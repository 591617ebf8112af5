#include "lbs/gateway/gazetteer.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "lbs/error.hpp"

namespace lbs::gateway {
namespace {

std::string norm(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  std::string out(s.substr(b, s.find_last_not_of(" \t") - b + 1));
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

}  // namespace

std::size_t Gazetteer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open gazetteer " + path.string());
  std::string line;
  std::size_t n = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string part; std::getline(ss, part, '\t');) f.push_back(part);
    try {
      if (f.size() != 4) throw std::invalid_argument("field count");
      add({f[0], f[1], geo::GeoPoint::make(std::stod(f[2]), std::stod(f[3]))});
    } catch (const std::invalid_argument&) {
      throw Error(ErrorCode::InvalidField, path.string() + ":" + std::to_string(lineno) + ": expected city, country, lat, lon");
    }
    ++n;
  }
  return n;
}

void Gazetteer::add(const GazetteerEntry& e) {
  if (find(e.city, e.country)) throw Error(ErrorCode::InvalidField, "duplicate gazetteer entry " + e.city + ", " + e.country);
  entries_.push_back(e);
}

const GazetteerEntry* Gazetteer::find(const std::string& city, const std::string& country) const {
  const auto c = norm(city), k = norm(country);
  for (const auto& e : entries_) {
    if (norm(e.city) == c && norm(e.country) == k) return &e;
  }
  return nullptr;
}

const GazetteerEntry& Gazetteer::geocode(const std::string& query) const {
  const auto comma = query.find(',');
  if (comma == std::string::npos || query.find(',', comma + 1) != std::string::npos) {
    throw Error(ErrorCode::MalformedQuery, "expected \"City, Country\"");
  }
  const auto city = norm(query.substr(0, comma));
  const auto country = norm(query.substr(comma + 1));
  if (city.empty() || country.empty()) throw Error(ErrorCode::MalformedQuery, "expected \"City, Country\"");
  const auto* e = find(city, country);
  if (!e) throw Error(ErrorCode::UnknownCity, "unknown city: " + query);
  return *e;
}

const GazetteerEntry* Gazetteer::nearest(const geo::GeoPoint& p, double max_distance) const {
  const GazetteerEntry* best = nullptr;
  double best_d = max_distance;
  for (const auto& e : entries_) {
    const double d = geo::haversine(p, e.centroid);
    if (d <= best_d) {
      best = &e;
      best_d = d;
    }
  }
  return best;
}

}  // namespace lbs::gateway
