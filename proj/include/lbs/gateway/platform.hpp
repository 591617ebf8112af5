#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "lbs/clock.hpp"
#include "lbs/content.hpp"
#include "lbs/crypto.hpp"
#include "lbs/events.hpp"
#include "lbs/gateway/config.hpp"
#include "lbs/gateway/gazetteer.hpp"
#include "lbs/gateway/tiles.hpp"
#include "lbs/gateway/wal.hpp"
#include "lbs/geostore.hpp"
#include "lbs/identity.hpp"
#include "lbs/localinfo.hpp"
#include "lbs/messaging.hpp"
#include "lbs/social.hpp"

namespace lbs::gateway {

class SmsTransport {
 public:
  virtual ~SmsTransport() = default;
  virtual void send(const std::string& phone, const std::string& text, Millis at) = 0;
};

/// Appends `ISO-8601 <TAB> phone <TAB> text` lines to a file.
class OutboxSms final : public SmsTransport {
 public:
  explicit OutboxSms(std::filesystem::path path) : path_(std::move(path)) {}
  void send(const std::string& phone, const std::string& text, Millis at) override;

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

class MemorySms final : public SmsTransport {
 public:
  struct Message {
    std::string phone;
    std::string text;
    Millis at;
  };
  void send(const std::string& phone, const std::string& text, Millis at) override;
  std::vector<Message> messages() const;
  /// Six-digit code in the newest message to `phone`, if any.
  std::optional<std::string> last_code(const std::string& phone) const;

 private:
  mutable std::mutex mutex_;
  std::vector<Message> messages_;
};

struct PlatformOptions {
  std::filesystem::path data_dir;  // empty: memory only, nothing persisted
  Millis session_ttl = identity::kDefaultSessionTtl;
  PasswordHasher::Cost password_cost = PasswordHasher::Cost::Interactive;
  std::uint64_t provider_seed = 0;
  Millis long_poll_timeout = 25'000;
  int snapshot_every = 1000;  // commits between snapshots, 0 = only on demand
  bool fsync = true;
  // Rewrites the snapshot once transit-only chat content has been
  // acknowledged, so no copy of it survives in the log.
  bool checkpoint_on_ack = true;
  std::map<std::string, std::string> tile_upstream = Config{}.tile_upstream;
  TileService::Fetcher tile_fetcher;
  std::filesystem::path gazetteer_path;
  std::filesystem::path poi_path;
  std::filesystem::path news_path;

  static PlatformOptions from(const Config& c);
};

struct Request {
  std::string token;
  json args = json::object();
  std::string body;  // raw upload bytes
  std::string content_type;
};

struct Reply {
  json ok;
  std::optional<std::string> bytes;  // binary payloads (blobs, tiles)
  std::string content_type;
};

struct OpInfo {
  std::string name;
  std::string module;
  bool auth = true;
  bool mutating = false;
};

struct RecoveryInfo {
  std::uint64_t snapshot_seq = 0;
  std::size_t replayed = 0;
  std::uint64_t truncated_bytes = 0;
  std::optional<std::string> warning;  // set when a corrupt tail was cut (CorruptLog)
};

/// Everything the state machine owns. Rebuilt from snapshot + log.
struct State {
  identity::Identity ids;
  social::Social social{ids};
  events::EventHub hub;
  messaging::Messaging msg{ids, social, hub};
  content::Content content{social, hub};
  localinfo::LocalInfo info{ids};
  geostore::GeoStore geo;

  json snapshot() const;
  void restore(const json& j);
};

/// The server core: every operation resolves its non-deterministic inputs
/// (clock, random codes, digests), then funnels state changes through a
/// single writer that applies the command and appends it to the log.
class Platform {
 public:
  Platform(PlatformOptions options, Clock& clock, RandomSource& rng, SmsTransport& sms);
  ~Platform();
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  /// Runs a public operation. Throws Error.
  Reply call(const std::string& op, const Request& req = {});
  static const std::vector<OpInfo>& operations();

  /// CLI-only: grants the admin flag. Throws UnknownUser.
  void grant_admin(const std::string& username);
  /// Commits presence transitions and session expiry, if any.
  bool sweep();
  /// Writes a snapshot and empties the log.
  void checkpoint();
  /// Wakes long-poll waiters; subsequent waits return immediately.
  void shutdown();

  /// Canonical JSON of the whole state (byte-identical for equal states).
  std::string state_dump() const;
  std::uint64_t seq() const;
  const RecoveryInfo& recovery() const { return recovery_; }
  const Gazetteer& gazetteer() const { return gazetteer_; }
  const PlatformOptions& options() const { return options_; }
  Millis now() const { return clock_.now(); }

  /// Read access for tests and tooling.
  template <typename F>
  auto inspect(F&& f) const {
    std::shared_lock lock(mutex_);
    return f(static_cast<const State&>(*state_));
  }

  /// Called under the writer lock after each commit (test hook).
  using CommitHook = std::function<void(std::uint64_t seq, const State& state)>;
  void on_commit(CommitHook cb) { on_commit_ = std::move(cb); }
  void crash_after_bytes(std::uint64_t n);

 private:
  friend struct Ops;

  json commit(json cmd);
  json apply(State& s, const json& cmd) const;
  void recover();
  void checkpoint_locked();
  Reply events(const Request& req);
  std::string city_of(const State& s, const std::string& user_id) const;

  PlatformOptions options_;
  Clock& clock_;
  RandomSource& rng_;
  SmsTransport& sms_;
  PasswordHasher hasher_;
  Gazetteer gazetteer_;
  std::unique_ptr<TileService> tiles_;
  std::unique_ptr<messaging::BlobStore> blobs_;
  std::unique_ptr<localinfo::WeatherProvider> weather_;

  mutable std::shared_mutex mutex_;
  std::condition_variable_any wakeup_;
  std::unique_ptr<State> state_;
  std::unique_ptr<WalWriter> wal_;
  std::uint64_t seq_ = 0;
  std::uint64_t since_snapshot_ = 0;
  Millis last_now_ = 0;
  std::atomic<bool> stopping_{false};
  RecoveryInfo recovery_;
  CommitHook on_commit_;
  int lock_fd_ = -1;
};

}  // namespace lbs::gateway
