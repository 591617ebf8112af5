#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "lbs/geostore.hpp"

using namespace lbs;
using namespace lbs::geostore;

namespace {

loc::Fix fix_at(double lat, double lon, Millis t = 0) {
  return loc::Fix{geo::GeoPoint::make(lat, lon), 10.0, loc::FixMethod::Trilateration, 0.0, t};
}

std::vector<std::string> ids(const std::vector<Neighbor>& ns) {
  std::vector<std::string> out;
  for (const auto& n : ns) out.push_back(n.record.user_id);
  return out;
}

// Linear-scan reference over a plain map of positions.
std::vector<std::string> brute_radius(const std::map<std::string, std::pair<geo::GeoPoint, bool>>& m,
                                      const geo::GeoPoint& c, double r, bool online_only) {
  std::vector<std::pair<double, std::string>> hits;
  for (const auto& [id, v] : m) {
    if (online_only && !v.second) continue;
    const double d = geo::haversine(c, v.first);
    if (d <= r) hits.emplace_back(d, id);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<std::string> out;
  for (auto& h : hits) out.push_back(h.second);
  return out;
}

std::vector<std::string> brute_knn(const std::map<std::string, std::pair<geo::GeoPoint, bool>>& m,
                                   const geo::GeoPoint& c, std::size_t k) {
  std::vector<std::pair<double, std::string>> all;
  for (const auto& [id, v] : m) all.emplace_back(geo::haversine(c, v.first), id);
  std::sort(all.begin(), all.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::NotFound;
}

}  // namespace

TEST(Geohash, KnownValues) {
  EXPECT_EQ(geohash::encode(geo::GeoPoint::make(57.64911, 10.40744), 11), "u4pruydqqvj");
  EXPECT_EQ(geohash::encode(geo::GeoPoint::make(42.6, -5.6), 5), "ezs42");
  const auto c = geohash::decode("ezs42");
  EXPECT_NEAR(c.lat, 42.605, 0.03);
  EXPECT_NEAR(c.lon, -5.603, 0.03);
}

TEST(Geohash, PrecisionSixCellSize) {
  geohash::Grid g(6);
  EXPECT_NEAR(g.cell_width_deg(), 360.0 / 32768, 1e-12);
  EXPECT_NEAR(g.cell_height_deg(), 180.0 / 32768, 1e-12);
}

TEST(GeoStore, UpsertLifecycle) {
  GeoStore store;
  EXPECT_FALSE(store.upsert_position("u1", fix_at(38.9, 121.6, 100)).has_value());
  EXPECT_EQ(store.size(), 1u);
  auto prev = store.upsert_position("u1", fix_at(38.91, 121.61, 200));
  ASSERT_TRUE(prev.has_value());
  EXPECT_EQ(prev->timestamp, 100);
  EXPECT_EQ(code_of([&] { store.upsert_position("u1", fix_at(0, 0, 150)); }),
            ErrorCode::StaleUpdate);
  EXPECT_EQ(store.get("u1")->fix.timestamp, 200);
  EXPECT_TRUE(store.audit());
}

TEST(GeoStore, RadiusQueryBasics) {
  GeoStore store;
  const auto c = geo::GeoPoint::make(38.9, 121.6);
  EXPECT_TRUE(store.query_radius(c, 1000).empty());
  EXPECT_EQ(code_of([&] { store.query_radius(c, 0); }), ErrorCode::RadiusOutOfRange);
  EXPECT_EQ(code_of([&] { store.query_radius(c, 50'001); }), ErrorCode::RadiusOutOfRange);

  store.upsert_position("edge", fix_at(38.91, 121.6));
  const double r = geo::haversine(c, store.get("edge")->fix.position);
  EXPECT_EQ(ids(store.query_radius(c, r)), std::vector<std::string>{"edge"});
  EXPECT_TRUE(store.query_radius(c, std::nextafter(r, 0.0)).empty());
}

TEST(GeoStore, OnlineFilterAndTies) {
  GeoStore store;
  store.upsert_position("b", fix_at(10, 10));
  store.upsert_position("a", fix_at(10, 10));
  store.set_online("b", true);
  const auto c = geo::GeoPoint::make(10, 10.001);
  EXPECT_EQ(ids(store.query_radius(c, 500)), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ids(store.query_radius(c, 500, true)), std::vector<std::string>{"b"});
}

TEST(GeoStore, RadiusMatchesBruteForce) {
  GeoStore store;
  std::map<std::string, std::pair<geo::GeoPoint, bool>> model;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lat(38.8, 39.0), lon(121.5, 121.7);
  for (int i = 0; i < 1000; ++i) {
    const auto id = "u" + std::to_string(i);
    const auto f = fix_at(lat(rng), lon(rng));
    store.upsert_position(id, f);
    model[id] = {f.position, false};
  }
  for (int q = 0; q < 50; ++q) {
    const auto c = geo::GeoPoint::make(lat(rng), lon(rng));
    EXPECT_EQ(ids(store.query_radius(c, 2000)), brute_radius(model, c, 2000, false));
  }
}

TEST(GeoStore, KnnBasics) {
  GeoStore store;
  const auto c = geo::GeoPoint::make(1, 1);
  store.upsert_position("x", fix_at(1, 1));
  store.upsert_position("y", fix_at(1.01, 1));
  store.upsert_position("z", fix_at(1, 1.02));
  EXPECT_EQ(store.query_knn(c, 5).size(), 3u);
  const auto one = store.query_knn(c, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].record.user_id, "x");
  EXPECT_EQ(one[0].distance, 0.0);
}

TEST(GeoStore, KnnMatchesBruteForce) {
  GeoStore store;
  std::map<std::string, std::pair<geo::GeoPoint, bool>> model;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> lat(38.8, 39.0), lon(121.5, 121.7);
  for (int i = 0; i < 1000; ++i) {
    const auto id = "u" + std::to_string(i);
    const auto f = fix_at(lat(rng), lon(rng));
    store.upsert_position(id, f);
    model[id] = {f.position, false};
  }
  for (int q = 0; q < 50; ++q) {
    const auto c = geo::GeoPoint::make(lat(rng), lon(rng));
    EXPECT_EQ(ids(store.query_knn(c, 10)), brute_knn(model, c, 10));
  }
  // Query far from every record falls back to a scan.
  const auto far = geo::GeoPoint::make(-45, -60);
  EXPECT_EQ(ids(store.query_knn(far, 3)), brute_knn(model, far, 3));
}

TEST(GeoStore, AntimeridianAndPoleQueries) {
  GeoStore store;
  std::map<std::string, std::pair<geo::GeoPoint, bool>> model;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  for (int i = 0; i < 300; ++i) {
    const auto id = "w" + std::to_string(i);
    const double lat = i % 2 ? 89.85 + jitter(rng) / 2 : jitter(rng);
    const auto f = fix_at(std::min(lat, 90.0), 180.0 + jitter(rng));
    store.upsert_position(id, f);
    model[id] = {f.position, false};
  }
  for (const auto& c : {geo::GeoPoint::make(0, 179.99), geo::GeoPoint::make(0, -179.99),
                        geo::GeoPoint::make(89.9, 0), geo::GeoPoint::make(90, 0)}) {
    EXPECT_EQ(ids(store.query_radius(c, 20'000)), brute_radius(model, c, 20'000, false));
    EXPECT_EQ(ids(store.query_knn(c, 7)), brute_knn(model, c, 7));
  }
  EXPECT_TRUE(store.audit());
}

TEST(GeoStore, RandomOperationsStayConsistent) {
  GeoStore store;
  std::map<std::string, std::pair<geo::GeoPoint, bool>> model;
  std::map<std::string, Millis> stamps;
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> lat(38.85, 38.95), lon(121.55, 121.65), u(0, 1);
  std::uniform_int_distribution<int> user(0, 150);
  for (int op = 0; op < 3000; ++op) {
    const auto id = "u" + std::to_string(user(rng));
    const double roll = u(rng);
    if (roll < 0.5) {
      const Millis t = stamps[id] + 1;
      const auto f = fix_at(lat(rng), lon(rng), t);
      store.upsert_position(id, f);
      stamps[id] = t;
      const bool online = model.count(id) ? model[id].second : false;
      model[id] = {f.position, online};
    } else if (roll < 0.6) {
      store.remove(id);
      model.erase(id);
    } else if (roll < 0.7) {
      const bool on = u(rng) < 0.5;
      if (store.set_online(id, on)) model[id].second = on;
    } else if (roll < 0.85) {
      const auto c = geo::GeoPoint::make(lat(rng), lon(rng));
      const bool online_only = u(rng) < 0.3;
      ASSERT_EQ(ids(store.query_radius(c, 1500, online_only)), brute_radius(model, c, 1500, online_only));
    } else {
      const auto c = geo::GeoPoint::make(lat(rng), lon(rng));
      ASSERT_EQ(ids(store.query_knn(c, 5)), brute_knn(model, c, 5));
    }
    ASSERT_TRUE(store.audit());
  }
}

TEST(GeoStore, PoiSearch) {
  GeoStore store;
  const auto c = geo::GeoPoint::make(38.91, 121.61);
  EXPECT_TRUE(store.search_poi(c, 5000, {PoiCategory::Hospital, std::nullopt}).empty());

  store.add_poi({"p1", "Dalian Restaurant", PoiCategory::Restaurant, geo::GeoPoint::make(38.912, 121.612)});
  store.add_poi({"p2", "Central Hospital", PoiCategory::Hospital, geo::GeoPoint::make(38.915, 121.605)});
  store.add_poi({"p3", "Far Bank", PoiCategory::Bank, geo::GeoPoint::make(40.0, 121.6)});
  const auto by_name = store.search_poi(c, 5000, {std::nullopt, "rest"});
  ASSERT_EQ(by_name.size(), 1u);
  EXPECT_EQ(by_name[0].poi.name, "Dalian Restaurant");
  EXPECT_EQ(store.search_poi(c, 5000).size(), 2u);
  EXPECT_EQ(store.search_poi(c, 5000, {PoiCategory::Bank, std::nullopt}).size(), 0u);
}

TEST(GeoStore, PoiFixtureMatchesBruteForce) {
  GeoStore store;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> lat(38.85, 38.95), lon(121.55, 121.65);
  const char* cats[] = {"Restaurant", "Hospital", "Bank", "Other"};
  std::vector<Poi> pois;
  for (int i = 0; i < 50; ++i) {
    Poi p{"poi" + std::to_string(i), std::string(cats[i % 4]) + " " + std::to_string(i),
          poi_category_from_string(cats[i % 4]), geo::GeoPoint::make(lat(rng), lon(rng))};
    pois.push_back(p);
    store.add_poi(p);
  }
  for (int q = 0; q < 20; ++q) {
    const auto c = geo::GeoPoint::make(lat(rng), lon(rng));
    const auto cat = poi_category_from_string(cats[q % 4]);
    std::vector<std::pair<double, std::string>> expect;
    for (const auto& p : pois) {
      const double d = geo::haversine(c, p.position);
      if (p.category == cat && d <= 3000) expect.emplace_back(d, p.poi_id);
    }
    std::sort(expect.begin(), expect.end());
    const auto got = store.search_poi(c, 3000, {cat, std::nullopt});
    ASSERT_EQ(got.size(), expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].poi.poi_id, expect[i].second);
  }
}

TEST(GeoStore, LoadsPoiSeedFile) {
  const auto path = std::filesystem::temp_directory_path() / "lbs_poi_seed.tsv";
  {
    std::ofstream out(path);
    out << "r1\tDalian Restaurant\tRestaurant\t38.912\t121.612\n";
    out << "h1\tZhongshan Hospital\thospital\t38.915\t121.605\n";
  }
  GeoStore store;
  EXPECT_EQ(store.load_pois(path), 2u);
  EXPECT_EQ(store.search_poi(geo::GeoPoint::make(38.91, 121.61), 2000, {PoiCategory::Hospital, std::nullopt})
                .size(),
            1u);
  std::filesystem::remove(path);
}

TEST(GeoStore, ConcurrentReadersAndWriter) {
  GeoStore store;
  for (int i = 0; i < 200; ++i) store.upsert_position("u" + std::to_string(i), fix_at(10, 10 + i * 1e-4, 0));
  std::atomic<bool> stop{false};
  std::thread writer([&] {
    for (Millis t = 1; t < 2000; ++t) store.upsert_position("u" + std::to_string(t % 200), fix_at(10, 10 + (t % 50) * 1e-4, t));
    stop = true;
  });
  std::vector<std::thread> readers;
  for (int r = 0; r < 3; ++r) {
    readers.emplace_back([&] {
      while (!stop) {
        const auto res = store.query_radius(geo::GeoPoint::make(10, 10.01), 5000);
        ASSERT_TRUE(std::is_sorted(res.begin(), res.end(), [](const Neighbor& a, const Neighbor& b) {
          return a.distance < b.distance;
        }));
      }
    });
  }
  writer.join();
  for (auto& t : readers) t.join();
  EXPECT_EQ(store.size(), 200u);
  EXPECT_TRUE(store.audit());
}
