#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace lbs::gateway {

inline constexpr int kMaxZoom = 19;

struct TileRef {
  std::string layer;
  int z = 0;
  long long x = 0;
  long long y = 0;
};

/// Throws TileOutOfRange (or InvalidField for an unknown layer).
void validate(const TileRef& t);

struct TileImage {
  std::string bytes;
  std::string content_type;
};

/// Deterministic 256x256 PNG naming the tile.
std::string render_synthetic_tile(const TileRef& t);

/// Map tiles per layer, cached on disk. An upstream of "synthetic" renders
/// locally; otherwise it is a URL template with {z}, {x} and {y}.
class TileService {
 public:
  /// Returns nullopt on any fetch failure.
  using Fetcher = std::function<std::optional<TileImage>(const std::string& url)>;

  TileService(std::filesystem::path cache_dir, std::map<std::string, std::string> upstream,
              Fetcher fetcher = {});

  /// Throws TileOutOfRange, UpstreamUnavailable.
  TileImage get(const TileRef& t);
  std::size_t upstream_fetches() const { return fetches_; }

  static std::optional<TileImage> http_fetch(const std::string& url);

 private:
  std::filesystem::path path_of(const TileRef& t) const;

  std::filesystem::path cache_dir_;
  std::map<std::string, std::string> upstream_;
  Fetcher fetcher_;
  std::mutex mutex_;
  std::map<std::string, TileImage> memory_;  // used when cache_dir is empty
  std::size_t fetches_ = 0;
};

}  // namespace lbs::gateway
