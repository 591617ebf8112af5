#include "lbs/gateway/tiles.hpp"

#include <fstream>
#include <sstream>

#include <httplib.h>

#include "lbs/error.hpp"
#include "lbs/gateway/png.hpp"

namespace lbs::gateway {
namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const std::filesystem::path& p, const std::string& data) {
  std::filesystem::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
  }
  std::filesystem::rename(tmp, p);
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

void validate(const TileRef& t) {
  if (t.layer != "normal" && t.layer != "satellite" && t.layer != "hybrid") {
    throw Error(ErrorCode::InvalidField, "layer must be normal, satellite or hybrid");
  }
  if (t.z < 0 || t.z > kMaxZoom) throw Error(ErrorCode::TileOutOfRange, "zoom must be in [0, 19]");
  const long long n = 1LL << t.z;
  if (t.x < 0 || t.x >= n || t.y < 0 || t.y >= n) {
    throw Error(ErrorCode::TileOutOfRange, "x and y must be in [0, 2^z)");
  }
}

std::string render_synthetic_tile(const TileRef& t) {
  static const std::map<std::string, std::pair<std::uint32_t, std::uint32_t>> palette = {
      {"normal", {0xF2EFE9, 0x555555}}, {"satellite", {0x2E4A2E, 0xE0E0E0}}, {"hybrid", {0x3B5B6B, 0xFFD54F}}};
  const auto [bg, fg] = palette.at(t.layer);
  Image img(256, 256);
  img.fill(bg);
  img.rect(0, 0, 256, 2, fg);
  img.rect(0, 254, 256, 256, fg);
  img.rect(0, 0, 2, 256, fg);
  img.rect(254, 0, 256, 256, fg);
  img.text(12, 80, t.layer, 3, fg);
  img.text(12, 120, "Z=" + std::to_string(t.z), 2, fg);
  img.text(12, 146, "X=" + std::to_string(t.x), 2, fg);
  img.text(12, 172, "Y=" + std::to_string(t.y), 2, fg);
  return encode_png(img);
}

TileService::TileService(std::filesystem::path cache_dir, std::map<std::string, std::string> upstream,
                         Fetcher fetcher)
    : cache_dir_(std::move(cache_dir)), upstream_(std::move(upstream)),
      fetcher_(fetcher ? std::move(fetcher) : Fetcher(&TileService::http_fetch)) {}

std::filesystem::path TileService::path_of(const TileRef& t) const {
  return cache_dir_ / t.layer / std::to_string(t.z) / std::to_string(t.x) / std::to_string(t.y);
}

TileImage TileService::get(const TileRef& t) {
  validate(t);
  const auto path = path_of(t);
  std::lock_guard lock(mutex_);
  if (cache_dir_.empty()) {
    if (auto it = memory_.find(path.string()); it != memory_.end()) return it->second;
  } else if (std::filesystem::exists(path)) {
    auto type = std::filesystem::exists(path.string() + ".type") ? read_file(path.string() + ".type") : "image/png";
    return TileImage{read_file(path), type};
  }

  TileImage img;
  const auto it = upstream_.find(t.layer);
  const std::string tmpl = it == upstream_.end() ? "synthetic" : it->second;
  if (tmpl == "synthetic") {
    img = TileImage{render_synthetic_tile(t), "image/png"};
  } else {
    auto url = tmpl;
    replace_all(url, "{z}", std::to_string(t.z));
    replace_all(url, "{x}", std::to_string(t.x));
    replace_all(url, "{y}", std::to_string(t.y));
    ++fetches_;
    auto fetched = fetcher_(url);
    if (!fetched) throw Error(ErrorCode::UpstreamUnavailable, "tile upstream did not answer");
    img = std::move(*fetched);
  }
  if (cache_dir_.empty()) {
    memory_[path.string()] = img;
  } else {
    write_atomic(path, img.bytes);
    write_atomic(path.string() + ".type", img.content_type);
  }
  return img;
}

std::optional<TileImage> TileService::http_fetch(const std::string& url) {
  // Only plain http is supported; TLS is left to a fronting proxy.
  if (!url.starts_with("http://")) return std::nullopt;
  const auto slash = url.find('/', 7);
  const auto origin = url.substr(0, slash);
  const auto target = slash == std::string::npos ? "/" : url.substr(slash);
  httplib::Client cli(origin);
  cli.set_connection_timeout(5);
  cli.set_read_timeout(10);
  auto res = cli.Get(target);
  if (!res || res->status != 200) return std::nullopt;
  return TileImage{res->body, res->get_header_value("Content-Type", 0).empty()
                                  ? "image/png"
                                  : res->get_header_value("Content-Type")};
}

}  // namespace lbs::gateway
