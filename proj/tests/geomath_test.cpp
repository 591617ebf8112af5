#include <random>

#include <gtest/gtest.h>

#include "lbs/error.hpp"
#include "lbs/geomath.hpp"
#include "oracles.hpp"

using namespace lbs;
using namespace lbs::geo;

namespace {

GeoPoint random_point(std::mt19937_64& rng, double max_abs_lat = 90.0) {
  std::uniform_real_distribution<double> lat(-max_abs_lat, max_abs_lat);
  std::uniform_real_distribution<double> lon(-180.0, 180.0);
  return GeoPoint::make(lat(rng), lon(rng));
}

// Destination point along a great circle; independent of to_enu.
GeoPoint destination(GeoPoint from, double bearing, double meters) {
  const double d = meters / kEarthRadius;
  const double p1 = deg2rad(from.lat), l1 = deg2rad(from.lon);
  const double p2 = std::asin(std::sin(p1) * std::cos(d) + std::cos(p1) * std::sin(d) * std::cos(bearing));
  const double l2 = l1 + std::atan2(std::sin(bearing) * std::sin(d) * std::cos(p1),
                                    std::cos(d) - std::sin(p1) * std::sin(p2));
  return GeoPoint::make(rad2deg(p2), rad2deg(l2));
}

}  // namespace

TEST(Haversine, IdentityIsZero) {
  const auto p = GeoPoint::make(10.0, 20.0);
  EXPECT_EQ(haversine(p, p), 0.0);
}

TEST(Haversine, AntipodalIsHalfCircumference) {
  const double d = haversine(GeoPoint::make(0, 0), GeoPoint::make(0, 180));
  EXPECT_NEAR(d, 20'015'086.8, 0.1);
  EXPECT_NEAR(d, std::numbers::pi * kEarthRadius, 1e-6);
}

TEST(Haversine, MatchesLawOfCosinesOneDegree) {
  const long double expected = oracle::law_of_cosines(0, 0, 0, 1);
  const double got = haversine(GeoPoint::make(0, 0), GeoPoint::make(0, 1));
  EXPECT_NEAR(got / static_cast<double>(expected), 1.0, 1e-6);
}

TEST(Haversine, MatchesLawOfCosinesRandom) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const auto a = random_point(rng), b = random_point(rng);
    const long double expected = oracle::law_of_cosines(a.lat, a.lon, b.lat, b.lon);
    if (expected < 1000.0L) continue;  // acos loses precision at short range
    EXPECT_NEAR(haversine(a, b) / static_cast<double>(expected), 1.0, 1e-6);
  }
}

TEST(Haversine, SymmetricAndBounded) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10'000; ++i) {
    const auto a = random_point(rng), b = random_point(rng);
    const double d = haversine(a, b);
    ASSERT_EQ(d, haversine(b, a));
    ASSERT_GE(d, 0.0);
    ASSERT_LE(d, std::numbers::pi * kEarthRadius + 1e-6);
  }
}

TEST(Haversine, TriangleInequality) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 10'000; ++i) {
    const auto a = random_point(rng), b = random_point(rng), c = random_point(rng);
    ASSERT_LE(haversine(a, c), haversine(a, b) + haversine(b, c) + 1e-6);
  }
}

TEST(GeoPoint, NormalizesLongitudeAndRejectsBadLatitude) {
  EXPECT_DOUBLE_EQ(GeoPoint::make(0, -180).lon, 180.0);
  EXPECT_DOUBLE_EQ(GeoPoint::make(0, 190).lon, -170.0);
  EXPECT_DOUBLE_EQ(GeoPoint::make(0, 540).lon, 180.0);
  EXPECT_THROW(GeoPoint::make(91, 0), Error);
  EXPECT_THROW(GeoPoint::make(std::nan(""), 0), Error);
}

TEST(Enu, OriginMapsToZero) {
  const auto o = GeoPoint::make(38.91, 121.61);
  const auto e = to_enu(o, o);
  EXPECT_EQ(e.east, 0.0);
  EXPECT_EQ(e.north, 0.0);
}

TEST(Enu, RoundTripWithinFiftyKilometres) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> bearing(0, 2 * std::numbers::pi), range(0, 50'000);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto o = random_point(rng, 85.0);
    const auto p = destination(o, bearing(rng), range(rng));
    const auto back = from_enu(o, to_enu(o, p));
    worst = std::max({worst, std::abs(back.lat - p.lat), std::abs(normalize_lon(back.lon - p.lon))});
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Enu, EastComponentMatchesHaversine) {
  const auto o = GeoPoint::make(0, 0), p = GeoPoint::make(0, 0.001);
  const double east = to_enu(o, p).east;
  EXPECT_NEAR(east / haversine(o, p), 1.0, 1e-3);
}

TEST(Enu, NormTracksHaversineUpTo100Km) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> bearing(0, 2 * std::numbers::pi), range(10, 99'000);
  for (int i = 0; i < 5000; ++i) {
    const auto o = random_point(rng, 80.0);
    const auto p = destination(o, bearing(rng), range(rng));
    const double h = haversine(o, p);
    ASSERT_NEAR(to_enu(o, p).norm() / h, 1.0, 1e-3) << o.lat << "," << o.lon;
  }
}

TEST(Enu, WrapsAcrossAntimeridian) {
  const auto o = GeoPoint::make(10, 179.999), p = GeoPoint::make(10, -179.999);
  const auto e = to_enu(o, p);
  EXPECT_GT(e.east, 0.0);
  EXPECT_NEAR(e.norm(), haversine(o, p), 0.01);
}

TEST(Enu, RejectsFarPoints) {
  const auto o = GeoPoint::make(0, 0);
  try {
    to_enu(o, GeoPoint::make(0, 1.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutOfProjectionRange);
  }
}

TEST(BoundingBox, ContainsDisc) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> bearing(0, 2 * std::numbers::pi), frac(0, 1);
  for (int i = 0; i < 2000; ++i) {
    const auto c = random_point(rng);
    const double r = 50'000 * frac(rng) + 1;
    const auto box = BoundingBox::around(c, r);
    const auto p = destination(c, bearing(rng), r * frac(rng));
    ASSERT_TRUE(box.contains(p)) << c.lat << "," << c.lon << " r=" << r;
  }
}

TEST(BoundingBox, FlagsAntimeridianWrap) {
  const auto box = BoundingBox::around(GeoPoint::make(0, 179.99), 5000);
  EXPECT_TRUE(box.wraps());
  EXPECT_TRUE(box.contains(GeoPoint::make(0, -179.99)));
  EXPECT_FALSE(box.contains(GeoPoint::make(0, 0)));
}

TEST(Centroid, HandlesAntimeridian) {
  std::vector<GeoPoint> pts{GeoPoint::make(0, 179.0), GeoPoint::make(0, -179.0)};
  const auto c = centroid(pts);
  EXPECT_NEAR(std::abs(c.lon), 180.0, 1e-9);
}
