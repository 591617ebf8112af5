#include "lbs/gateway/config.hpp"

#include <fstream>
#include <sstream>

#include "lbs/error.hpp"

namespace lbs::gateway {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

std::string Config::host() const {
  const auto colon = listen_addr.rfind(':');
  return colon == std::string::npos ? listen_addr : listen_addr.substr(0, colon);
}

int Config::port() const {
  const auto colon = listen_addr.rfind(':');
  if (colon == std::string::npos) return 8080;
  const auto text = listen_addr.substr(colon + 1);
  std::size_t used = 0;
  const int port = std::stoi(text, &used);
  if (used != text.size() || port < 0 || port > 65535) throw std::out_of_range("port out of range: " + text);
  return port;
}

Config parse_config(const std::string& text, const std::filesystem::path& base) {
  Config c;
  auto path = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_relative() && !base.empty() ? base / p : p;
  };
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    auto bad = [&](const std::string& why) {
      return Error(ErrorCode::InvalidField, "config line " + std::to_string(lineno) + ": " + why);
    };
    if (eq == std::string::npos) throw bad("expected key = value");
    const auto key = trim(t.substr(0, eq));
    const auto value = trim(t.substr(eq + 1));
    try {
      if (key == "listen_addr") {
        c.listen_addr = value;
        c.port();
      } else if (key == "data_dir") {
        c.data_dir = path(value);
      } else if (key.starts_with("tile_upstream.")) {
        const auto layer = key.substr(14);
        if (!c.tile_upstream.contains(layer)) throw bad("unknown tile layer " + layer);
        c.tile_upstream[layer] = value;
      } else if (key == "gazetteer_path") {
        c.gazetteer_path = path(value);
      } else if (key == "poi_path") {
        c.poi_path = path(value);
      } else if (key == "news_path") {
        c.news_path = path(value);
      } else if (key == "provider_seed") {
        c.provider_seed = std::stoull(value);
      } else if (key == "session_ttl_hours") {
        c.session_ttl_hours = std::stoi(value);
        if (c.session_ttl_hours <= 0) throw bad("session_ttl_hours must be positive");
      } else if (key == "password_cost") {
        if (value != "interactive" && value != "minimal") throw bad("password_cost is interactive or minimal");
        c.password_cost = value;
      } else if (key == "long_poll_seconds") {
        c.long_poll_seconds = std::stoi(value);
      } else if (key == "snapshot_every") {
        c.snapshot_every = std::stoi(value);
      } else if (key == "fsync") {
        if (value != "true" && value != "false") throw bad("fsync is true or false");
        c.fsync = value == "true";
      } else {
        throw bad("unknown key " + key);
      }
    } catch (const std::logic_error&) {
      throw bad("bad value for " + key);
    }
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace lbs::gateway
