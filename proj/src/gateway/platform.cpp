#include "lbs/gateway/platform.hpp"

#include <fstream>
#include <regex>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

namespace lbs::gateway {
namespace {

constexpr const char* kWalFile = "wal.log";
constexpr const char* kSnapshotFile = "snapshot.json";
constexpr double kCityRadius = 100'000.0;

json record_to_json(const geostore::PresenceRecord& r) {
  return json{{"user_id", r.user_id}, {"fix", r.fix}, {"online", r.online}, {"updated_at", r.updated_at}};
}

}  // namespace

void OutboxSms::send(const std::string& phone, const std::string& text, Millis at) {
  std::lock_guard lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  out << localinfo::format_iso8601(at) << '\t' << phone << '\t' << text << '\n';
}

void MemorySms::send(const std::string& phone, const std::string& text, Millis at) {
  std::lock_guard lock(mutex_);
  messages_.push_back({phone, text, at});
}

std::vector<MemorySms::Message> MemorySms::messages() const {
  std::lock_guard lock(mutex_);
  return messages_;
}

std::optional<std::string> MemorySms::last_code(const std::string& phone) const {
  std::lock_guard lock(mutex_);
  static const std::regex code(R"((\d{6}))");
  for (auto it = messages_.rbegin(); it != messages_.rend(); ++it) {
    std::smatch m;
    if (it->phone == phone && std::regex_search(it->text, m, code)) return m[1].str();
  }
  return std::nullopt;
}

PlatformOptions PlatformOptions::from(const Config& c) {
  PlatformOptions o;
  o.data_dir = c.data_dir;
  o.session_ttl = static_cast<Millis>(c.session_ttl_hours) * 3'600'000;
  o.password_cost = c.password_cost == "minimal" ? PasswordHasher::Cost::Minimal : PasswordHasher::Cost::Interactive;
  o.provider_seed = c.provider_seed;
  o.long_poll_timeout = static_cast<Millis>(c.long_poll_seconds) * 1000;
  o.snapshot_every = c.snapshot_every;
  o.fsync = c.fsync;
  o.tile_upstream = c.tile_upstream;
  o.gazetteer_path = c.gazetteer_path;
  o.poi_path = c.poi_path;
  o.news_path = c.news_path;
  return o;
}

json State::snapshot() const {
  json records = json::array();
  for (const auto& r : geo.records()) records.push_back(record_to_json(r));
  return json{{"identity", ids.snapshot()}, {"social", social.snapshot()},   {"events", hub.snapshot()},
              {"messaging", msg.snapshot()}, {"content", content.snapshot()}, {"localinfo", info.snapshot()},
              {"positions", records}};
}

void State::restore(const json& j) {
  ids.restore(j.at("identity"));
  social.restore(j.at("social"));
  hub.restore(j.at("events"));
  msg.restore(j.at("messaging"));
  content.restore(j.at("content"));
  info.restore(j.at("localinfo"));
  std::vector<geostore::PresenceRecord> records;
  for (const auto& r : j.at("positions")) {
    records.push_back({r.at("user_id"), r.at("fix").get<loc::Fix>(), r.at("online"), r.at("updated_at")});
  }
  geo.restore(records);
}

Platform::Platform(PlatformOptions options, Clock& clock, RandomSource& rng, SmsTransport& sms)
    : options_(std::move(options)), clock_(clock), rng_(rng), sms_(sms), hasher_(options_.password_cost),
      state_(std::make_unique<State>()) {
  if (!options_.gazetteer_path.empty()) gazetteer_.load(options_.gazetteer_path);
  if (!options_.poi_path.empty()) state_->geo.load_pois(options_.poi_path);
  if (!options_.news_path.empty()) state_->info.load_news(options_.news_path);
  weather_ = std::make_unique<localinfo::SyntheticWeather>(options_.provider_seed);
  const auto& dir = options_.data_dir;
  tiles_ = std::make_unique<TileService>(dir.empty() ? dir : dir / "tiles", options_.tile_upstream,
                                         options_.tile_fetcher);
  blobs_ = std::make_unique<messaging::BlobStore>(dir.empty() ? dir : dir / "blobs");
  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    lock_fd_ = ::open((dir / "LOCK").c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (lock_fd_ < 0 || ::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
      if (lock_fd_ >= 0) ::close(lock_fd_);
      throw std::runtime_error("data directory " + dir.string() + " is in use by another process");
    }
    recover();
  }
}

Platform::~Platform() {
  shutdown();
  wal_.reset();
  if (lock_fd_ >= 0) ::close(lock_fd_);
}

void Platform::recover() {
  const auto dir = options_.data_dir;
  if (auto snap = read_file(dir / kSnapshotFile)) {
    const auto j = json::parse(*snap);
    state_->restore(j.at("state"));
    seq_ = j.at("seq").get<std::uint64_t>();
    last_now_ = j.at("last_now").get<Millis>();
    recovery_.snapshot_seq = seq_;
  }
  const auto wal_path = dir / kWalFile;
  auto scan = read_wal(wal_path);
  std::uint64_t keep = scan.valid_bytes;
  std::uint64_t offset = 0;
  for (const auto& r : scan.records) {
    const auto len = encode_record(r).size();
    if (r.seq <= seq_) {
      offset += len;
      continue;
    }
    if (r.seq != seq_ + 1) {
      scan.problem = "log starts at seq " + std::to_string(r.seq) + " after snapshot seq " + std::to_string(seq_);
      keep = offset;
      break;
    }
    const auto cmd = json::parse(r.payload);
    try {
      apply(*state_, cmd);
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptLog, "record " + std::to_string(r.seq) + " no longer applies: " + e.what());
    }
    seq_ = r.seq;
    last_now_ = std::max(last_now_, cmd.at("now").get<Millis>());
    ++recovery_.replayed;
    offset += len;
  }
  // A log made entirely of records the snapshot already holds is stale.
  if (!scan.records.empty() && scan.records.back().seq <= recovery_.snapshot_seq && !scan.problem) keep = 0;
  wal_ = std::make_unique<WalWriter>(wal_path, options_.fsync);
  if (keep != wal_->size()) {
    recovery_.truncated_bytes = wal_->size() - keep;
    wal_->truncate(keep);
  }
  if (scan.problem) {
    recovery_.warning = std::string(to_string(ErrorCode::CorruptLog)) + ": " + *scan.problem + "; truncated " +
                        std::to_string(recovery_.truncated_bytes) + " bytes";
  }
}

json Platform::commit(json cmd) {
  json result;
  bool snapshot_due = false;
  {
    std::unique_lock lock(mutex_);
    const Millis now = std::max(clock_.now(), last_now_);
    cmd["now"] = now;
    result = apply(*state_, cmd);
    last_now_ = now;
    ++seq_;
    if (wal_) {
      wal_->append(WalRecord{seq_, kCommandTag, cmd.dump()});
      snapshot_due = options_.snapshot_every > 0 && ++since_snapshot_ >= static_cast<std::uint64_t>(options_.snapshot_every);
      if (snapshot_due) checkpoint_locked();
    }
    if (on_commit_) on_commit_(seq_, *state_);
  }
  wakeup_.notify_all();
  return result;
}

void Platform::checkpoint() {
  std::unique_lock lock(mutex_);
  checkpoint_locked();
}

void Platform::checkpoint_locked() {
  if (!wal_) return;
  const json snap{{"seq", seq_}, {"last_now", last_now_}, {"state", state_->snapshot()}};
  write_file_atomic(options_.data_dir / kSnapshotFile, snap.dump(), options_.fsync);
  wal_->truncate(0);
  since_snapshot_ = 0;
}

void Platform::crash_after_bytes(std::uint64_t n) {
  std::unique_lock lock(mutex_);
  if (wal_) wal_->crash_after(n);
}

void Platform::shutdown() {
  {
    std::unique_lock lock(mutex_);
    stopping_ = true;
  }
  wakeup_.notify_all();
}

std::string Platform::state_dump() const {
  std::shared_lock lock(mutex_);
  return json{{"seq", seq_}, {"state", state_->snapshot()}}.dump();
}

std::uint64_t Platform::seq() const {
  std::shared_lock lock(mutex_);
  return seq_;
}

void Platform::grant_admin(const std::string& username) {
  commit(json{{"op", "set_admin"}, {"username", username}, {"admin", true}});
}

bool Platform::sweep() {
  {
    std::shared_lock lock(mutex_);
    const auto now = clock_.now();
    if (state_->msg.stale_online(now).empty() && !state_->ids.has_expired_sessions(now)) return false;
  }
  commit(json{{"op", "presence_sweep"}});
  return true;
}

std::string Platform::city_of(const State& s, const std::string& user_id) const {
  if (auto rec = s.geo.get(user_id)) {
    if (const auto* e = gazetteer_.nearest(rec->fix.position, kCityRadius)) return e->city;
  }
  return s.ids.get(user_id).city;
}

Reply Platform::events(const Request& req) {
  auto num = [&](const char* key, double fallback) {
    if (!req.args.contains(key)) return fallback;
    const auto& v = req.args.at(key);
    try {
      return v.is_number() ? v.get<double>() : std::stod(v.get<std::string>());
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadRequest, std::string("bad number: ") + key);
    }
  };
  const auto since = static_cast<std::uint64_t>(std::max(0.0, num("since", 0)));
  const double timeout_s = std::clamp(num("timeout", static_cast<double>(options_.long_poll_timeout) / 1000.0), 0.0,
                                      static_cast<double>(options_.long_poll_timeout) / 1000.0);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000));

  std::string user;
  while (true) {
    bool sync = false;
    {
      std::shared_lock lock(mutex_);
      user = state_->ids.authenticate(req.token, clock_.now());
      sync = state_->msg.has_pending(user) || state_->hub.has_transient_upto(user, since);
    }
    if (sync) {
      const auto r = commit(json{{"op", "events_sync"}, {"token", req.token}, {"since", since}});
      if (r.at("acked").get<std::size_t>() > 0 && options_.checkpoint_on_ack) checkpoint();
    }
    std::shared_lock lock(mutex_);
    auto evs = state_->hub.since(user, since, 1000);
    if (!evs.empty() || stopping_) {
      return Reply{json{{"events", evs}, {"latest", state_->hub.latest(user)}}, std::nullopt, {}};
    }
    const bool woke = wakeup_.wait_until(lock, deadline, [&] {
      return stopping_ || state_->hub.latest(user) > since || state_->msg.has_pending(user);
    });
    if (!woke) return Reply{json{{"events", json::array()}, {"latest", state_->hub.latest(user)}}, std::nullopt, {}};
  }
}

}  // namespace lbs::gateway
