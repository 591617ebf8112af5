#pragma once

// JSON encodings for the shared value types. Module-specific types declare
// their own to_json/from_json next to the type.

#include <json.hpp>

#include "lbs/geomath.hpp"
#include "lbs/localization.hpp"

namespace lbs {

using json = nlohmann::json;

/// Reads a required member; throws Error{BadRequest} when missing or mistyped.
template <typename T>
T require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::BadRequest, std::string("missing field: ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::BadRequest, std::string("bad field: ") + key);
  }
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::BadRequest, std::string("bad field: ") + key);
  }
}

namespace geo {
void to_json(json& j, const GeoPoint& p);
void from_json(const json& j, GeoPoint& p);
}  // namespace geo

namespace loc {
void to_json(json& j, const Beacon& b);
void from_json(const json& j, Beacon& b);
void to_json(json& j, const Fix& f);
void from_json(const json& j, Fix& f);
void to_json(json& j, const RangeMeasurement& m);
void from_json(const json& j, RangeMeasurement& m);
void to_json(json& j, const TdoaMeasurement& m);
void from_json(const json& j, TdoaMeasurement& m);
}  // namespace loc

}  // namespace lbs
