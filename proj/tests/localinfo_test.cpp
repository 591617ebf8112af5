#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "harness.hpp"
#include "lbs/localinfo.hpp"

using namespace lbs;
using namespace lbs::localinfo;
using lbs::testing::kEpoch;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::BadRequest;
}

DayWeather day_with(double rain, double high) {
  DayWeather d;
  d.temp_low = high - 5;
  d.temp_high = high;
  d.rain_probability = rain;
  return d;
}

std::string enrol(identity::Identity& ids, const std::string& name) {
  identity::RegisterForm f{name, "pw", name, name + "@x.org", "13800000000", "Male", "Dalian", "China", {}};
  return ids.register_user(f, "digest", "111111", kEpoch).user_id;
}

bool has(const std::vector<std::string>& v, const char* s) { return std::find(v.begin(), v.end(), s) != v.end(); }

}  // namespace

TEST(Weather, SuggestionRules) {
  EXPECT_TRUE(has(suggestions_for(day_with(80, 20)), kUmbrella));
  EXPECT_FALSE(has(suggestions_for(day_with(80, 20)), kClothes));
  EXPECT_TRUE(has(suggestions_for(day_with(10, 5)), kClothes));
  EXPECT_FALSE(has(suggestions_for(day_with(10, 5)), kUmbrella));
  // Thresholds are strict.
  EXPECT_TRUE(suggestions_for(day_with(50, 10)).empty());
  EXPECT_EQ(suggestions_for(day_with(50.5, 9.9)).size(), 2u);
  EXPECT_EQ(std::string(kUmbrella), "remember to bring umbrella");
  EXPECT_EQ(std::string(kClothes), "take more clothes");
}

TEST(Weather, SyntheticDaysAreWellFormed) {
  SyntheticWeather w(42);
  int rainy = 0, cold = 0;
  const auto start = parse_date("2026-01-01");
  for (const char* city : {"Dalian, China", "Beijing, China", "Harbin, China"}) {
    for (std::int64_t d = start; d < start + 365; ++d) {
      const auto day = w.day(city, d);
      ASSERT_LE(day.temp_low, day.temp_high);
      ASSERT_GE(day.humidity, 0.0);
      ASSERT_LE(day.humidity, 100.0);
      ASSERT_GE(day.rain_probability, 0.0);
      ASSERT_LE(day.rain_probability, 100.0);
      ASSERT_GE(day.sunshine_hours, 0.0);
      ASSERT_LE(day.sunshine_hours, 24.0);
      ASSERT_GE(day.wind_speed, 0.0);
      ASSERT_EQ(day.suggestions, suggestions_for(day));
      ASSERT_EQ(day.date, format_date(d));
      rainy += day.rain_probability >= 80;
      cold += day.temp_high < 10;
    }
  }
  // Both suggestions actually occur over a year of synthetic weather.
  EXPECT_GT(rainy, 0);
  EXPECT_GT(cold, 0);
}

TEST(Weather, ForecastIsThreeConsecutiveDaysAndDeterministic) {
  SyntheticWeather w(42), again(42), other(43);
  const auto r = w.forecast("Dalian, China", "2026-12-31");
  ASSERT_EQ(r.days.size(), 3u);
  EXPECT_EQ(r.days[0].date, "2026-12-31");
  EXPECT_EQ(r.days[1].date, "2027-01-01");
  EXPECT_EQ(r.days[2].date, "2027-01-02");
  for (int i = 0; i < 3; ++i) EXPECT_EQ(r.days[i].day_offset, i);
  EXPECT_EQ(json(r).dump(), json(again.forecast("Dalian, China", "2026-12-31")).dump());
  EXPECT_NE(json(r.days).dump(), json(other.forecast("Dalian, China", "2026-12-31").days).dump());
  EXPECT_EQ(code_of([&] { w.forecast("Dalian, China", "2026-02-30"); }), ErrorCode::InvalidField);
  EXPECT_EQ(code_of([&] { w.forecast("Dalian, China", "tomorrow"); }), ErrorCode::InvalidField);
}

TEST(Weather, ThroughPlatform) {
  lbs::testing::Harness h;
  const auto t = h.signup("alice");
  const auto home = h.call("weather", t);
  EXPECT_EQ(home.at("city"), "Dalian, China");
  EXPECT_EQ(home, h.call("weather", t, {{"city", "dalian, china"}}));
  EXPECT_EQ(h.fail("weather", t, {{"city", "Atlantis, Nowhere"}}), "UnknownCity");
  EXPECT_EQ(h.fail("weather", t, {{"city", "Atlantis"}}), "MalformedQuery");
}

TEST(Dates, RoundTrips) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 2000; ++i) {
    const auto d = static_cast<std::int64_t>(rng() % 60'000) - 10'000;
    ASSERT_EQ(parse_date(format_date(d)), d);
    const auto t = static_cast<Millis>(rng() % 4'000'000'000ULL) * 1000;
    ASSERT_EQ(parse_iso8601(format_iso8601(t)), t);
  }
  EXPECT_EQ(parse_date("1970-01-01"), 0);
  EXPECT_EQ(parse_iso8601("2026-10-01T08:00:00Z"), 1'790'841'600'000);
  EXPECT_EQ(code_of([] { parse_iso8601("2026-10-01 08:00"); }), ErrorCode::InvalidField);
}

TEST(News, SubscriptionFilterAndCityScope) {
  identity::Identity ids;
  LocalInfo info(ids);
  const auto u1 = enrol(ids, "reader");
  info.add_news(Section::Sports, "Dalian", "s1", "", kEpoch + 1);
  info.add_news(Section::Politics, "Dalian", "p1", "", kEpoch + 2);
  info.add_news(Section::Sports, "*", "s2", "", kEpoch + 3);
  info.add_news(Section::Sports, "Beijing", "s3", "", kEpoch + 4);
  EXPECT_TRUE(info.news_feed(u1, "Dalian", 0, 100).empty());  // nothing subscribed yet
  info.subscribe(u1, {Section::Sports});
  const auto feed = info.news_feed(u1, "dalian", 0, 100);
  ASSERT_EQ(feed.size(), 2u);
  EXPECT_EQ(feed[0].headline, "s2");
  EXPECT_EQ(feed[1].headline, "s1");
  info.subscribe(u1, {});
  EXPECT_TRUE(info.news_feed(u1, "Dalian", 0, 100).empty());
  EXPECT_EQ(code_of([] { section_from_string("Gossip"); }), ErrorCode::UnknownSection);
}

TEST(News, PagingMatchesLinearScan) {
  std::mt19937_64 rng(100);
  identity::Identity ids;
  LocalInfo info(ids);
  const auto u = enrol(ids, "reader");
  const std::vector<std::string> cities = {"Dalian", "*", "Beijing"};
  struct Row {
    std::int64_t id;
    Millis at;
    Section section;
    std::string city;
  };
  std::vector<Row> rows;
  for (int i = 0; i < 100; ++i) {
    const auto s = kSections[rng() % kSections.size()];
    const auto& c = cities[rng() % cities.size()];
    const Millis at = kEpoch + static_cast<Millis>(rng() % 40) * 60'000;  // many ties
    rows.push_back({info.add_news(s, c, "h" + std::to_string(i), "", at).item_id, at, s, c});
  }
  const std::set<Section> subs = {Section::Sports, Section::Tech, Section::Local};
  info.subscribe(u, subs);
  std::vector<Row> expected;
  for (const auto& r : rows) {
    if (subs.contains(r.section) && (r.city == "*" || r.city == "Dalian")) expected.push_back(r);
  }
  std::sort(expected.begin(), expected.end(),
            [](const Row& a, const Row& b) { return a.at != b.at ? a.at > b.at : a.id > b.id; });
  std::vector<std::int64_t> got;
  std::int64_t cursor = 0;
  while (true) {
    const auto page = info.news_feed(u, "Dalian", cursor, 20);
    if (page.empty()) break;
    ASSERT_LE(page.size(), 20u);
    for (const auto& n : page) got.push_back(n.item_id);
    cursor = page.back().item_id;
  }
  ASSERT_EQ(got.size(), expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], expected[i].id);
}

TEST(News, SeedFileFormat) {
  const auto dir = std::filesystem::temp_directory_path() / ("lbs-news-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "news.tsv");
    out << "# section\tcity\theadline\tbody\ttime\n"
        << "Sports\tDalian\tMarathon\tRoads close at 7\t2026-10-01T08:00:00Z\n"
        << "\n"
        << "tech\t*\tNew phone\tFaster\t2026-10-02T09:30:00\r\n";
  }
  identity::Identity ids;
  LocalInfo info(ids);
  const auto u = enrol(ids, "reader");
  EXPECT_EQ(info.load_news(dir / "news.tsv"), 2u);
  info.subscribe(u, {Section::Sports, Section::Tech});
  const auto feed = info.news_feed(u, "Dalian", 0, 10);
  ASSERT_EQ(feed.size(), 2u);
  EXPECT_EQ(feed[0].headline, "New phone");
  EXPECT_EQ(feed[1].published_at, 1'790'841'600'000);
  {
    std::ofstream out(dir / "bad.tsv");
    out << "Sports\tDalian\tonly three\n";
  }
  EXPECT_EQ(code_of([&] { info.load_news(dir / "bad.tsv"); }), ErrorCode::BadRequest);
  {
    std::ofstream out(dir / "bad2.tsv");
    out << "Gossip\tDalian\th\tb\t2026-10-01T08:00:00Z\n";
  }
  EXPECT_EQ(code_of([&] { info.load_news(dir / "bad2.tsv"); }), ErrorCode::UnknownSection);
  std::filesystem::remove_all(dir);
}

TEST(News, ShippedSeedLoads) {
  identity::Identity ids;
  LocalInfo info(ids);
  EXPECT_GT(info.load_news(LBS_SOURCE_DIR "/data/news.tsv"), 0u);
}

TEST(Forum, ModerationLifecycle) {
  lbs::testing::Harness h;
  const auto author = h.signup("author");
  const auto reader = h.signup("reader");
  const auto boss = h.signup("boss");
  const auto far = h.signup("far", {}, "Beijing");
  h.platform->grant_admin("boss");

  const auto post = h.call("forum_post", author, {{"title", "Lost cat"}, {"body", "Grey, near the square"}});
  const auto id = post.at("post_id").get<std::int64_t>();
  EXPECT_EQ(post.at("state"), "Pending");
  EXPECT_EQ(post.at("city"), "Dalian");
  EXPECT_TRUE(h.call("forum_list", reader).empty());
  EXPECT_EQ(h.call("forum_list", author).size(), 1u);  // authors see their own posts
  EXPECT_EQ(h.fail("forum_get", reader, {{"id", id}}), "UnknownPost");
  EXPECT_EQ(h.fail("forum_reply", author, {{"id", id}, {"body", "bump"}}), "NotApproved");
  EXPECT_EQ(h.fail("forum_queue", reader), "NotAdmin");
  EXPECT_EQ(h.fail("forum_moderate", reader, {{"id", id}, {"decision", "approve"}}), "NotAdmin");
  const auto queue = h.call("forum_queue", boss);
  ASSERT_EQ(queue.size(), 1u);
  EXPECT_EQ(queue[0].at("post_id"), id);

  h.call("forum_moderate", boss, {{"id", id}, {"decision", "approve"}});
  EXPECT_EQ(h.call("forum_list", reader).size(), 1u);
  EXPECT_TRUE(h.call("forum_list", far).empty());  // another city
  h.call("forum_reply", reader, {{"id", id}, {"body", "Saw it by the fountain"}});
  EXPECT_EQ(h.call("forum_get", reader, {{"id", id}}).at("replies").size(), 1u);
  EXPECT_TRUE(h.call("forum_queue", boss).empty());
  EXPECT_EQ(h.fail("forum_moderate", boss, {{"id", id}, {"decision", "reject"}}), "BadRequest");
  EXPECT_EQ(h.fail("forum_moderate", boss, {{"id", 99}, {"decision", "reject"}}), "UnknownPost");

  const auto spam = h.call("forum_post", author, {{"title", "Buy"}, {"body", "now"}}).at("post_id");
  h.call("forum_moderate", boss, {{"id", spam}, {"decision", "reject"}});
  EXPECT_EQ(h.call("forum_list", reader).size(), 1u);
  const auto own = h.call("forum_list", author);
  ASSERT_EQ(own.size(), 2u);
  EXPECT_EQ(own[0].at("state"), "Rejected");
  EXPECT_EQ(h.fail("forum_reply", reader, {{"id", spam}, {"body", "x"}}), "UnknownPost");
}

TEST(Forum, HiddenPostsNeverLeak) {
  std::mt19937_64 rng(3);
  identity::Identity ids;
  std::vector<std::string> users;
  for (int i = 0; i < 6; ++i) {
    identity::RegisterForm f{"f" + std::to_string(i), "pw", "n", "f@x.org", "13800000000", "Male", "Dalian", "China", {}};
    users.push_back(ids.register_user(f, "d", "111111", kEpoch).user_id);
  }
  ids.set_admin(users[0], true);
  LocalInfo info(ids);
  for (int i = 0; i < 200; ++i) {
    const auto& who = users[rng() % users.size()];
    const auto& p = info.forum_post(who, "Dalian", "t", "b", kEpoch + i);
    if (rng() % 3 == 0) info.moderate(users[0], p.post_id, rng() % 2);
  }
  for (const auto& viewer : users) {
    const bool admin = viewer == users[0];
    for (const auto& p : info.forum_list(viewer, "Dalian")) {
      ASSERT_TRUE(admin || p.author == viewer || p.state == PostState::Approved);
    }
  }
}
