#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lbs/identity.hpp"

namespace lbs::localinfo {

inline constexpr const char* kUmbrella = "remember to bring umbrella";
inline constexpr const char* kClothes = "take more clothes";

struct DayWeather {
  std::string date;  // YYYY-MM-DD
  int day_offset = 0;
  double temp_low = 0.0;
  double temp_high = 0.0;
  double sunshine_hours = 0.0;
  double humidity = 0.0;
  double wind_speed = 0.0;
  double rain_probability = 0.0;
  std::vector<std::string> suggestions;

  friend bool operator==(const DayWeather&, const DayWeather&) = default;
};

struct WeatherReport {
  std::string city;
  std::array<DayWeather, 3> days;

  friend bool operator==(const WeatherReport&, const WeatherReport&) = default;
};

void to_json(json& j, const DayWeather& d);
void to_json(json& j, const WeatherReport& r);

/// Suggestions derived only from the day's numbers.
std::vector<std::string> suggestions_for(const DayWeather& d);

/// Parses YYYY-MM-DD into a day count since 1970-01-01; throws InvalidField.
std::int64_t parse_date(const std::string& date);
std::string format_date(std::int64_t days);
std::string date_of(Millis t);

class WeatherProvider {
 public:
  virtual ~WeatherProvider() = default;
  /// Three consecutive days starting at `date`. May throw ProviderUnavailable.
  virtual WeatherReport forecast(const std::string& city, const std::string& date) const = 0;
};

/// Deterministic generator: each day is a pure function of (city, date, seed).
class SyntheticWeather final : public WeatherProvider {
 public:
  explicit SyntheticWeather(std::uint64_t seed) : seed_(seed) {}
  WeatherReport forecast(const std::string& city, const std::string& date) const override;
  DayWeather day(const std::string& city, std::int64_t days_since_epoch) const;

 private:
  std::uint64_t seed_;
};

enum class Section { Sports, Health, Politics, Local, Tech };
inline constexpr std::array kSections = {Section::Sports, Section::Health, Section::Politics,
                                         Section::Local, Section::Tech};
std::string_view to_string(Section s);
Section section_from_string(std::string_view s);  // UnknownSection

struct NewsItem {
  std::int64_t item_id = 0;
  Section section = Section::Local;
  std::string city;  // "*" for every city
  std::string headline;
  std::string body;
  Millis published_at = 0;
};

void to_json(json& j, const NewsItem& n);

/// Parses an ISO-8601 UTC timestamp (YYYY-MM-DDTHH:MM:SS[Z]).
Millis parse_iso8601(const std::string& s);
std::string format_iso8601(Millis t);

enum class PostState { Pending, Approved, Rejected };
std::string_view to_string(PostState s);

struct Reply {
  std::int64_t reply_id = 0;
  std::string author;
  std::string body;
  Millis at = 0;
};

struct ForumPost {
  std::int64_t post_id = 0;
  std::string author;
  std::string city;
  std::string title;
  std::string body;
  PostState state = PostState::Pending;
  Millis created_at = 0;
  std::vector<Reply> replies;
};

void to_json(json& j, const ForumPost& p);

/// News subscriptions and the moderated forum. News items are static seed
/// data; subscriptions and forum posts are state.
class LocalInfo {
 public:
  explicit LocalInfo(const identity::Identity& ids) : ids_(ids) {}

  /// Tab-separated: section, city, headline, body, ISO-8601 time. Returns
  /// the number of items loaded.
  std::size_t load_news(const std::filesystem::path& path);
  const NewsItem& add_news(Section section, const std::string& city, const std::string& headline,
                           const std::string& body, Millis published_at);
  std::size_t news_count() const { return news_.size(); }

  void subscribe(const std::string& user, const std::set<Section>& sections);
  std::set<Section> subscriptions(const std::string& user) const;
  /// Newest first by (published_at, item_id); `before` is an item id cursor.
  std::vector<NewsItem> news_feed(const std::string& user, const std::string& city,
                                  std::int64_t before, std::size_t limit) const;

  const ForumPost& forum_post(const std::string& author, const std::string& city,
                              const std::string& title, const std::string& body, Millis now);
  const ForumPost& moderate(const std::string& admin, std::int64_t post_id, bool approve);
  Reply reply(const std::string& user, std::int64_t post_id, const std::string& body, Millis now);
  /// Approved posts of the city, plus the viewer's own posts in any state.
  /// Admins see every post of the city.
  std::vector<ForumPost> forum_list(const std::string& viewer, const std::string& city) const;
  std::vector<ForumPost> moderation_queue(const std::string& admin) const;
  const ForumPost& forum_get(const std::string& viewer, std::int64_t post_id) const;

  json snapshot() const;
  void restore(const json& j);

 private:
  bool can_read(const std::string& viewer, const ForumPost& p) const;

  const identity::Identity& ids_;
  std::vector<NewsItem> news_;
  std::map<std::string, std::set<Section>> subs_;
  std::map<std::int64_t, ForumPost> posts_;
  std::int64_t next_post_ = 1;
  std::int64_t next_reply_ = 1;
};

}  // namespace lbs::localinfo
