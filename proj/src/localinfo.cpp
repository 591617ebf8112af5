#include "lbs/localinfo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace lbs::localinfo {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double unit(std::uint64_t& state) { return static_cast<double>(splitmix(state) >> 11) * 0x1.0p-53; }

double round1(double v) { return std::round(v * 10.0) / 10.0; }

}  // namespace

void to_json(json& j, const DayWeather& d) {
  j = json{{"date", d.date},
           {"day_offset", d.day_offset},
           {"temp_low", d.temp_low},
           {"temp_high", d.temp_high},
           {"sunshine_hours", d.sunshine_hours},
           {"humidity", d.humidity},
           {"wind_speed", d.wind_speed},
           {"rain_probability", d.rain_probability},
           {"suggestions", d.suggestions}};
}

void to_json(json& j, const WeatherReport& r) { j = json{{"city", r.city}, {"days", r.days}}; }

std::vector<std::string> suggestions_for(const DayWeather& d) {
  std::vector<std::string> out;
  if (d.rain_probability > 50.0) out.emplace_back(kUmbrella);
  if (d.temp_high < 10.0) out.emplace_back(kClothes);
  return out;
}

std::int64_t parse_date(const std::string& date) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (date.size() != 10 || std::sscanf(date.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
    throw Error(ErrorCode::InvalidField, "date must be YYYY-MM-DD");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw Error(ErrorCode::InvalidField, "no such date: " + date);
  return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

std::string format_date(std::int64_t days) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string date_of(Millis t) {
  return format_date(static_cast<std::int64_t>(std::floor(static_cast<double>(t) / 86'400'000.0)));
}

Millis parse_iso8601(const std::string& s) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char tail[4] = {};
  const int n = std::sscanf(s.c_str(), "%4d-%2u-%2uT%2u:%2u:%2u%3s", &y, &mo, &d, &h, &mi, &sec, tail);
  if (n < 6 || (n == 7 && std::string(tail) != "Z") || h > 23 || mi > 59 || sec > 60) {
    throw Error(ErrorCode::InvalidField, "timestamp must be ISO-8601 (YYYY-MM-DDTHH:MM:SSZ): " + s);
  }
  char date[16];
  std::snprintf(date, sizeof date, "%04d-%02u-%02u", y, mo, d);
  return parse_date(date) * 86'400'000LL + (h * 3600LL + mi * 60LL + sec) * 1000LL;
}

std::string format_iso8601(Millis t) {
  const auto day = static_cast<std::int64_t>(std::floor(static_cast<double>(t) / 86'400'000.0));
  const auto rem = (t - day * 86'400'000LL) / 1000;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02lld:%02lld:%02lldZ", format_date(day).c_str(),
                static_cast<long long>(rem / 3600), static_cast<long long>(rem / 60 % 60),
                static_cast<long long>(rem % 60));
  return buf;
}

DayWeather SyntheticWeather::day(const std::string& city, std::int64_t days) const {
  std::uint64_t state = fnv1a(lower(city) + "|" + format_date(days)) ^ seed_;
  const double doy = static_cast<double>(((days % 365) + 365) % 365);
  const double season = std::sin(2.0 * std::numbers::pi * (doy - 110.0) / 365.0);
  const double mean = 12.0 + 14.0 * season + (unit(state) - 0.5) * 10.0;
  DayWeather d;
  d.date = format_date(days);
  d.temp_low = round1(mean - 2.0 - 6.0 * unit(state));
  d.temp_high = round1(mean + 2.0 + 6.0 * unit(state));
  d.rain_probability = std::round(100.0 * unit(state));
  d.humidity = std::round(std::clamp(30.0 + 0.5 * d.rain_probability + 25.0 * unit(state), 0.0, 100.0));
  d.wind_speed = round1(15.0 * unit(state));
  d.sunshine_hours = round1((14.0 - 4.0 * (1.0 - season)) * (1.0 - d.rain_probability / 100.0) * unit(state));
  d.suggestions = suggestions_for(d);
  return d;
}

WeatherReport SyntheticWeather::forecast(const std::string& city, const std::string& date) const {
  const auto start = parse_date(date);
  WeatherReport r;
  r.city = city;
  for (int i = 0; i < 3; ++i) {
    r.days[static_cast<std::size_t>(i)] = day(city, start + i);
    r.days[static_cast<std::size_t>(i)].day_offset = i;
  }
  return r;
}

std::string_view to_string(Section s) {
  switch (s) {
    case Section::Sports: return "Sports";
    case Section::Health: return "Health";
    case Section::Politics: return "Politics";
    case Section::Local: return "Local";
    case Section::Tech: return "Tech";
  }
  return "Local";
}

Section section_from_string(std::string_view s) {
  for (auto v : kSections) {
    if (lower(to_string(v)) == lower(s)) return v;
  }
  throw Error(ErrorCode::UnknownSection, "unknown news section: " + std::string(s));
}

void to_json(json& j, const NewsItem& n) {
  j = json{{"item_id", n.item_id},   {"section", std::string(to_string(n.section))},
           {"city", n.city},         {"headline", n.headline},
           {"body", n.body},         {"published_at", n.published_at}};
}

std::string_view to_string(PostState s) {
  switch (s) {
    case PostState::Pending: return "Pending";
    case PostState::Approved: return "Approved";
    case PostState::Rejected: return "Rejected";
  }
  return "Pending";
}

void to_json(json& j, const ForumPost& p) {
  json replies = json::array();
  for (const auto& r : p.replies) {
    replies.push_back({{"reply_id", r.reply_id}, {"author", r.author}, {"body", r.body}, {"at", r.at}});
  }
  j = json{{"post_id", p.post_id}, {"author", p.author},   {"city", p.city},
           {"title", p.title},     {"body", p.body},       {"state", std::string(to_string(p.state))},
           {"created_at", p.created_at}, {"replies", replies}};
}

// ---------------------------------------------------------------------------

std::size_t LocalInfo::load_news(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open news seed " + path.string());
  std::string line;
  std::size_t n = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string part; std::getline(ss, part, '\t');) f.push_back(part);
    if (f.size() != 5) {
      throw Error(ErrorCode::BadRequest, path.string() + ":" + std::to_string(lineno) + ": expected 5 tab-separated fields");
    }
    add_news(section_from_string(f[0]), f[1], f[2], f[3], parse_iso8601(f[4]));
    ++n;
  }
  return n;
}

const NewsItem& LocalInfo::add_news(Section section, const std::string& city, const std::string& headline,
                                    const std::string& body, Millis published_at) {
  news_.push_back(NewsItem{static_cast<std::int64_t>(news_.size()) + 1, section, city, headline, body, published_at});
  return news_.back();
}

void LocalInfo::subscribe(const std::string& user, const std::set<Section>& sections) {
  ids_.get(user);
  subs_[user] = sections;
}

std::set<Section> LocalInfo::subscriptions(const std::string& user) const {
  auto it = subs_.find(user);
  return it == subs_.end() ? std::set<Section>{} : it->second;
}

std::vector<NewsItem> LocalInfo::news_feed(const std::string& user, const std::string& city,
                                           std::int64_t before, std::size_t limit) const {
  const auto subs = subscriptions(user);
  const auto key = lower(city);
  std::vector<const NewsItem*> all;
  for (const auto& n : news_) {
    if (!subs.contains(n.section)) continue;
    if (n.city != "*" && lower(n.city) != key) continue;
    all.push_back(&n);
  }
  auto newer = [](const NewsItem* a, const NewsItem* b) {
    if (a->published_at != b->published_at) return a->published_at > b->published_at;
    return a->item_id > b->item_id;
  };
  std::sort(all.begin(), all.end(), newer);
  std::size_t start = 0;
  if (before > 0) {
    if (before > static_cast<std::int64_t>(news_.size())) throw Error(ErrorCode::NotFound, "unknown news cursor");
    const auto* cursor = &news_[static_cast<std::size_t>(before - 1)];
    while (start < all.size() && !newer(cursor, all[start])) ++start;
  }
  std::vector<NewsItem> out;
  for (auto i = start; i < all.size() && out.size() < limit; ++i) out.push_back(*all[i]);
  return out;
}

const ForumPost& LocalInfo::forum_post(const std::string& author, const std::string& city,
                                       const std::string& title, const std::string& body, Millis now) {
  if (title.empty()) throw Error(ErrorCode::MissingField, "title is empty");
  if (body.empty()) throw Error(ErrorCode::MissingField, "body is empty");
  if (title.size() > 256 || body.size() > 16 * 1024) throw Error(ErrorCode::TooLong, "forum post too long");
  ForumPost p{next_post_++, author, city, title, body, PostState::Pending, now, {}};
  return posts_.emplace(p.post_id, std::move(p)).first->second;
}

const ForumPost& LocalInfo::moderate(const std::string& admin, std::int64_t post_id, bool approve) {
  if (!ids_.get(admin).is_admin) throw Error(ErrorCode::NotAdmin, "moderation needs an administrator");
  auto it = posts_.find(post_id);
  if (it == posts_.end()) throw Error(ErrorCode::UnknownPost, "no such post");
  if (it->second.state != PostState::Pending) throw Error(ErrorCode::BadRequest, "post was already moderated");
  it->second.state = approve ? PostState::Approved : PostState::Rejected;
  return it->second;
}

Reply LocalInfo::reply(const std::string& user, std::int64_t post_id, const std::string& body, Millis now) {
  auto it = posts_.find(post_id);
  if (it == posts_.end() || !can_read(user, it->second)) throw Error(ErrorCode::UnknownPost, "no such post");
  if (it->second.state != PostState::Approved) throw Error(ErrorCode::NotApproved, "post is not approved");
  if (body.empty()) throw Error(ErrorCode::MissingField, "body is empty");
  if (body.size() > 16 * 1024) throw Error(ErrorCode::TooLong, "reply too long");
  Reply r{next_reply_++, user, body, now};
  it->second.replies.push_back(r);
  return r;
}

bool LocalInfo::can_read(const std::string& viewer, const ForumPost& p) const {
  if (p.state == PostState::Approved || p.author == viewer) return true;
  const auto* v = ids_.find(viewer);
  return v && v->is_admin;
}

std::vector<ForumPost> LocalInfo::forum_list(const std::string& viewer, const std::string& city) const {
  const auto key = lower(city);
  std::vector<ForumPost> out;
  for (auto it = posts_.rbegin(); it != posts_.rend(); ++it) {
    const auto& p = it->second;
    if (lower(p.city) != key && p.author != viewer) continue;
    if (can_read(viewer, p)) out.push_back(p);
  }
  return out;
}

std::vector<ForumPost> LocalInfo::moderation_queue(const std::string& admin) const {
  if (!ids_.get(admin).is_admin) throw Error(ErrorCode::NotAdmin, "moderation needs an administrator");
  std::vector<ForumPost> out;
  for (const auto& [_, p] : posts_) {
    if (p.state == PostState::Pending) out.push_back(p);
  }
  return out;
}

const ForumPost& LocalInfo::forum_get(const std::string& viewer, std::int64_t post_id) const {
  auto it = posts_.find(post_id);
  if (it == posts_.end() || !can_read(viewer, it->second)) throw Error(ErrorCode::UnknownPost, "no such post");
  return it->second;
}

json LocalInfo::snapshot() const {
  json subs = json::object();
  for (const auto& [u, s] : subs_) {
    json list = json::array();
    for (auto v : s) list.push_back(std::string(to_string(v)));
    subs[u] = list;
  }
  json posts = json::array();
  for (const auto& [_, p] : posts_) posts.push_back(p);
  return json{{"subscriptions", subs}, {"posts", posts}, {"next_post", next_post_}, {"next_reply", next_reply_}};
}

void LocalInfo::restore(const json& j) {
  subs_.clear();
  posts_.clear();
  for (const auto& [u, list] : j.at("subscriptions").items()) {
    auto& s = subs_[u];
    for (const auto& v : list) s.insert(section_from_string(v.get<std::string>()));
  }
  for (const auto& p : j.at("posts")) {
    ForumPost v{p.at("post_id"), p.at("author"), p.at("city"), p.at("title"), p.at("body"),
                PostState::Pending, p.at("created_at"), {}};
    const auto st = p.at("state").get<std::string>();
    v.state = st == "Approved" ? PostState::Approved : st == "Rejected" ? PostState::Rejected : PostState::Pending;
    for (const auto& r : p.at("replies")) v.replies.push_back(Reply{r.at("reply_id"), r.at("author"), r.at("body"), r.at("at")});
    posts_.emplace(v.post_id, std::move(v));
  }
  next_post_ = j.at("next_post");
  next_reply_ = j.at("next_reply");
}

}  // namespace lbs::localinfo
