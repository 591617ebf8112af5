#include "lbs/geohash.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

#include "lbs/error.hpp"

namespace lbs::geohash {
namespace {

constexpr std::string_view kAlphabet = "0123456789bcdefghjkmnpqrstuvwxyz";

}  // namespace

Grid::Grid(int chars) : chars_(chars) {
  if (chars < 1 || chars > 12) throw Error(ErrorCode::BadRequest, "geohash precision must be 1..12");
  const int bits = 5 * chars;
  lon_bits_ = (bits + 1) / 2;
  lat_bits_ = bits / 2;
}

Cell Grid::cell_of(const geo::GeoPoint& p) const {
  const double fx = (p.lon + 180.0) / 360.0 * static_cast<double>(columns());
  const double fy = (p.lat + 90.0) / 180.0 * static_cast<double>(rows());
  return Cell{std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(fx)), 0, columns() - 1),
              std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(fy)), 0, rows() - 1)};
}

std::string Grid::encode(const Cell& c) const {
  std::string out;
  out.reserve(static_cast<std::size_t>(chars_));
  int lon_left = lon_bits_, lat_left = lat_bits_;
  bool lon_turn = true;
  unsigned acc = 0;
  int nbits = 0;
  while (lon_left + lat_left > 0) {
    unsigned bit;
    if (lon_turn) {
      bit = static_cast<unsigned>((c.x >> --lon_left) & 1);
    } else {
      bit = static_cast<unsigned>((c.y >> --lat_left) & 1);
    }
    lon_turn = !lon_turn;
    acc = (acc << 1) | bit;
    if (++nbits == 5) {
      out.push_back(kAlphabet[acc]);
      acc = 0;
      nbits = 0;
    }
  }
  return out;
}

std::string encode(const geo::GeoPoint& p, int chars) { return Grid(chars).encode(p); }

geo::GeoPoint decode(const std::string& hash) {
  double lat_lo = -90, lat_hi = 90, lon_lo = -180, lon_hi = 180;
  bool lon_turn = true;
  for (char ch : hash) {
    const auto idx = kAlphabet.find(ch);
    if (idx == std::string_view::npos) throw Error(ErrorCode::BadRequest, "bad geohash character");
    for (int b = 4; b >= 0; --b) {
      const bool bit = (idx >> b) & 1;
      if (lon_turn) {
        const double mid = (lon_lo + lon_hi) / 2;
        (bit ? lon_lo : lon_hi) = mid;
      } else {
        const double mid = (lat_lo + lat_hi) / 2;
        (bit ? lat_lo : lat_hi) = mid;
      }
      lon_turn = !lon_turn;
    }
  }
  return geo::GeoPoint{(lat_lo + lat_hi) / 2, (lon_lo + lon_hi) / 2};
}

}  // namespace lbs::geohash
