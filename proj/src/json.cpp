#include "lbs/json.hpp"

namespace lbs {

namespace geo {

void to_json(json& j, const GeoPoint& p) { j = json{{"lat", p.lat}, {"lon", p.lon}}; }

void from_json(const json& j, GeoPoint& p) {
  p = GeoPoint::make(require<double>(j, "lat"), require<double>(j, "lon"));
}

}  // namespace geo

namespace loc {

void to_json(json& j, const Beacon& b) {
  j = json{{"id", b.id},
           {"position", b.position},
           {"kind", std::string(to_string(b.kind))},
           {"range_radius", b.range_radius}};
}

void from_json(const json& j, Beacon& b) {
  b.id = value_or<std::string>(j, "id", "");
  b.position = require<geo::GeoPoint>(j, "position");
  b.kind = beacon_kind_from_string(value_or<std::string>(j, "kind", "GpsPseudo"));
  b.range_radius = value_or<double>(j, "range_radius", Beacon{}.range_radius);
  b.validate();
}

void to_json(json& j, const Fix& f) {
  j = json{{"position", f.position},
           {"accuracy", f.accuracy},
           {"method", std::string(to_string(f.method))},
           {"residual_rms", f.residual_rms},
           {"timestamp", f.timestamp}};
}

void from_json(const json& j, Fix& f) {
  f.position = require<geo::GeoPoint>(j, "position");
  f.accuracy = require<double>(j, "accuracy");
  f.method = fix_method_from_string(require<std::string>(j, "method"));
  f.residual_rms = value_or<double>(j, "residual_rms", 0.0);
  f.timestamp = require<Millis>(j, "timestamp");
}

void to_json(json& j, const RangeMeasurement& m) {
  j = json{{"kind", "range"}, {"beacon", m.beacon}, {"range", m.range}, {"sigma", m.sigma}};
}

void from_json(const json& j, RangeMeasurement& m) {
  m.beacon = require<Beacon>(j, "beacon");
  m.range = require<double>(j, "range");
  m.sigma = value_or<double>(j, "sigma", 1.0);
}

void to_json(json& j, const TdoaMeasurement& m) {
  j = json{{"kind", "tdoa"},
           {"reference", m.reference},
           {"beacon", m.beacon},
           {"delta_t", m.delta_t},
           {"sigma_t", m.sigma_t}};
}

void from_json(const json& j, TdoaMeasurement& m) {
  m.reference = require<Beacon>(j, "reference");
  m.beacon = require<Beacon>(j, "beacon");
  m.delta_t = require<double>(j, "delta_t");
  m.sigma_t = value_or<double>(j, "sigma_t", 1e-8);
}

}  // namespace loc

}  // namespace lbs
