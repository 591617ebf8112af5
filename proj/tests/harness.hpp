#pragma once

// In-process platform with a manual clock, seeded randomness and an in-memory
// SMS outbox, plus shortcuts for the account dance most tests start with.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "lbs/gateway/platform.hpp"

namespace lbs::testing {

using gateway::MemorySms;
using gateway::Platform;
using gateway::PlatformOptions;
using gateway::Request;

inline constexpr Millis kEpoch = 1'790'000'000'000;  // 2026-09-21
inline constexpr const char* kPassword = "correct horse";

inline PlatformOptions memory_options() {
  PlatformOptions o;
  o.password_cost = PasswordHasher::Cost::Minimal;
  o.long_poll_timeout = 2'000;
  o.fsync = false;
  o.gazetteer_path = LBS_SOURCE_DIR "/data/gazetteer.tsv";
  o.poi_path = LBS_SOURCE_DIR "/data/pois.tsv";
  o.news_path = LBS_SOURCE_DIR "/data/news.tsv";
  return o;
}

struct Harness {
  ManualClock clock{kEpoch};
  SeededRandom rng;
  MemorySms sms;
  std::unique_ptr<Platform> platform;
  std::map<std::string, std::string> phones;

  explicit Harness(PlatformOptions options = memory_options(), std::uint64_t seed = 7) : rng(seed) {
    platform = std::make_unique<Platform>(std::move(options), clock, rng, sms);
  }

  json call(const std::string& op, const std::string& token = {}, json args = json::object()) {
    return platform->call(op, Request{token, std::move(args)}).ok;
  }

  /// Runs `op` expecting failure; returns the wire code ("" if it succeeded).
  std::string fail(const std::string& op, const std::string& token = {}, json args = json::object()) {
    try {
      platform->call(op, Request{token, std::move(args)});
    } catch (const Error& e) {
      return std::string(to_string(e.code()));
    }
    return {};
  }

  json form(const std::string& username, const std::vector<std::string>& interests = {},
            const std::string& city = "Dalian") {
    const auto phone = std::to_string(13'800'000'000LL + static_cast<long long>(phones.size()));
    phones[username] = phone;
    return json{{"username", username}, {"password", kPassword},  {"nickname", username + "-nick"},
                {"email", username + "@example.org"}, {"phone", phone}, {"gender", "Female"},
                {"city", city}, {"country", "China"}, {"interests", interests}};
  }

  /// register + activate + login; returns the session token.
  std::string signup(const std::string& username, const std::vector<std::string>& interests = {},
                     const std::string& city = "Dalian") {
    call("register", {}, form(username, interests, city));
    call("activate", {}, {{"username", username}, {"code", *sms.last_code(phones.at(username))}});
    return login(username);
  }

  std::string login(const std::string& username, const std::string& password = kPassword) {
    return call("login", {}, {{"username", username}, {"password", password}}).at("token").get<std::string>();
  }

  std::string id_of(const std::string& username) {
    return platform->inspect([&](const gateway::State& s) { return s.ids.find_by_username(username)->user_id; });
  }

  void befriend(const std::string& a_token, const std::string& a, const std::string& b_token, const std::string& b) {
    call("friend_request", a_token, {{"user", b}});
    call("request_accept", b_token, {{"user", a}});
  }

  void place(const std::string& token, double lat, double lon, double accuracy = 10.0) {
    call("position", token, {{"fix", {{"lat", lat}, {"lon", lon}, {"accuracy", accuracy}}}});
  }
};

}  // namespace lbs::testing
