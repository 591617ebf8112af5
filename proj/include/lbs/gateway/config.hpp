#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace lbs::gateway {

struct Config {
  std::string listen_addr = "127.0.0.1:8080";
  std::filesystem::path data_dir = "data";
  std::map<std::string, std::string> tile_upstream = {
      {"normal", "synthetic"}, {"satellite", "synthetic"}, {"hybrid", "synthetic"}};
  std::filesystem::path gazetteer_path;
  std::filesystem::path poi_path;
  std::filesystem::path news_path;
  std::uint64_t provider_seed = 0;
  int session_ttl_hours = 24;
  // Not in the documented key set; defaults suit production.
  std::string password_cost = "interactive";  // or "minimal"
  int long_poll_seconds = 25;
  int snapshot_every = 1000;
  bool fsync = true;

  std::string host() const;
  int port() const;
};

/// `key = value` lines; '#' starts a comment line. Relative paths resolve
/// against `base`. Throws Error{InvalidField} naming the offending line.
Config parse_config(const std::string& text, const std::filesystem::path& base = {});
Config load_config(const std::filesystem::path& path);

}  // namespace lbs::gateway
