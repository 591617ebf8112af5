#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lbs/events.hpp"
#include "lbs/identity.hpp"
#include "lbs/social.hpp"

namespace lbs::messaging {

inline constexpr std::size_t kMaxChatChars = 4096;
inline constexpr std::size_t kMaxSubjectChars = 256;
inline constexpr std::size_t kMaxMailBytes = 64 * 1024;
inline constexpr std::size_t kMaxBlobBytes = 5 * 1024 * 1024;
inline constexpr std::size_t kPendingCap = 1000;
inline constexpr Millis kLivenessWindow = 60'000;

/// Code points in a UTF-8 string; throws BadRequest on malformed input.
std::size_t utf8_length(std::string_view s);

struct ChatMessage {
  std::int64_t msg_id = 0;
  std::string from;
  std::string to;
  std::string body;
  std::string blob_id;
  Millis sent_at = 0;
  bool delivered = false;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct Mail {
  std::int64_t mail_id = 0;
  std::string from;
  std::string to;
  std::string subject;
  std::string body;
  Millis sent_at = 0;
  bool read = false;
  bool deleted_by_sender = false;
  bool deleted_by_recipient = false;
};

struct BlobInfo {
  std::string blob_id;
  std::size_t size = 0;
  std::string media;
};

struct Presence {
  std::string user_id;
  bool exists = false;
  bool online = false;
  std::optional<Millis> last_seen;
};

void to_json(json& j, const ChatMessage& m);
void from_json(const json& j, ChatMessage& m);
void to_json(json& j, const Mail& m);
void to_json(json& j, const Presence& p);

/// Content-addressed byte storage. With an empty root the bytes stay in
/// memory.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root = {});
  /// Stores bytes and returns their SHA-256 hex id. Throws TooLarge.
  std::string put(std::string_view bytes);
  std::optional<std::string> get(const std::string& blob_id) const;
  bool contains(const std::string& blob_id) const;

 private:
  std::filesystem::path root_;
  std::map<std::string, std::string> memory_;
};

/// Chat, mail, presence and blob metadata. Not synchronized; the caller
/// serializes mutations.
class Messaging {
 public:
  Messaging(const identity::Identity& ids, const social::Social& social, events::EventHub& hub)
      : ids_(ids), social_(social), hub_(hub) {}

  /// Throws NotFriends, BodyTooLarge, UnknownUser, UnknownBlob, BadRequest.
  ChatMessage send_chat(const std::string& from, const std::string& to, const std::string& body,
                        const std::string& blob_id, Millis now);
  void set_history_saving(const std::string& user, bool enabled);
  bool history_saving(const std::string& user) const;
  /// Persisted messages with msg_id < before_id, newest first. Throws
  /// Unauthorized when `viewer` is not one of the pair.
  std::vector<ChatMessage> history(const std::string& viewer, const std::string& a,
                                   const std::string& b, std::int64_t before_id,
                                   std::size_t limit) const;
  /// Every stored chat record, for store inspection.
  std::vector<ChatMessage> persisted() const;

  bool has_pending(const std::string& user) const;
  /// Moves held messages into the user's event stream, oldest first.
  std::size_t flush_pending(const std::string& user, Millis now);
  std::size_t pending_count(const std::string& user) const;

  Mail send_mail(const std::string& from, const std::string& to, const std::string& subject,
                 const std::string& body, Millis now);
  /// box: "inbox" or "sent". Newest first.
  std::vector<Mail> list_mail(const std::string& user, const std::string& box) const;
  std::size_t unread_count(const std::string& user) const;
  Mail read_mail(const std::string& user, std::int64_t mail_id);
  void delete_mail(const std::string& user, std::int64_t mail_id);

  void put_blob(const BlobInfo& info);
  const BlobInfo& blob(const std::string& blob_id) const;  // UnknownBlob
  bool has_blob(const std::string& blob_id) const;

  /// Returns true when the user came online with this heartbeat.
  bool heartbeat(const std::string& user, const std::string& token, Millis now);
  bool online(const std::string& user, Millis now) const;
  Presence presence(const std::string& user, Millis now) const;
  /// Users announced online who have since gone quiet.
  std::vector<std::string> stale_online(Millis now) const;
  /// Announces offline transitions; returns the users that went offline.
  std::vector<std::string> sweep(Millis now);

  json snapshot() const;
  void restore(const json& j);

 private:
  struct Conversation {
    std::int64_t next_id = 1;
    std::map<std::int64_t, ChatMessage> history;
    std::map<std::string, std::deque<ChatMessage>> pending;  // by recipient
    std::map<std::string, std::size_t> dropped;              // by recipient
  };
  using Key = std::pair<std::string, std::string>;
  static Key key(const std::string& a, const std::string& b);
  Mail& mail_for(const std::string& user, std::int64_t mail_id);
  void notify_friends(const std::string& user, bool online, Millis now);
  void deliver(const ChatMessage& m, bool transient, Millis now);

  const identity::Identity& ids_;
  const social::Social& social_;
  events::EventHub& hub_;

  std::map<Key, Conversation> conversations_;
  std::map<std::string, bool> saving_;
  std::map<std::int64_t, Mail> mails_;
  std::int64_t next_mail_ = 1;
  std::map<std::string, BlobInfo> blobs_;
  std::map<std::string, std::map<std::string, Millis>> heartbeats_;  // user -> token -> time
  std::map<std::string, Millis> last_seen_;
  std::set<std::string> announced_;
};

}  // namespace lbs::messaging
