#include "lbs/messaging.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "lbs/crypto.hpp"

namespace lbs::messaging {

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++n) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + len > s.size()) throw Error(ErrorCode::BadRequest, "text is not valid UTF-8");
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) throw Error(ErrorCode::BadRequest, "text is not valid UTF-8");
    }
    i += len;
  }
  return n;
}

void to_json(json& j, const ChatMessage& m) {
  j = json{{"msg_id", m.msg_id}, {"from", m.from},       {"to", m.to},
           {"body", m.body},     {"blob_id", m.blob_id}, {"sent_at", m.sent_at},
           {"delivered", m.delivered}};
}

void from_json(const json& j, ChatMessage& m) {
  m.msg_id = j.at("msg_id").get<std::int64_t>();
  m.from = j.at("from").get<std::string>();
  m.to = j.at("to").get<std::string>();
  m.body = j.at("body").get<std::string>();
  m.blob_id = j.at("blob_id").get<std::string>();
  m.sent_at = j.at("sent_at").get<Millis>();
  m.delivered = j.at("delivered").get<bool>();
}

void to_json(json& j, const Mail& m) {
  j = json{{"mail_id", m.mail_id},
           {"from", m.from},
           {"to", m.to},
           {"subject", m.subject},
           {"body", m.body},
           {"sent_at", m.sent_at},
           {"read", m.read},
           {"deleted_by_sender", m.deleted_by_sender},
           {"deleted_by_recipient", m.deleted_by_recipient}};
}

namespace {

Mail mail_from_json(const json& j) {
  return Mail{j.at("mail_id"), j.at("from"),    j.at("to"),
              j.at("subject"), j.at("body"),    j.at("sent_at"),
              j.at("read"),    j.at("deleted_by_sender"), j.at("deleted_by_recipient")};
}

}  // namespace

void to_json(json& j, const Presence& p) {
  j = json{{"user_id", p.user_id},
           {"exists", p.exists},
           {"online", p.online},
           {"last_seen", p.last_seen ? json(*p.last_seen) : json(nullptr)}};
}

// ---------------------------------------------------------------------------

BlobStore::BlobStore(std::filesystem::path root) : root_(std::move(root)) {
  if (!root_.empty()) std::filesystem::create_directories(root_);
}

std::string BlobStore::put(std::string_view bytes) {
  if (bytes.size() > kMaxBlobBytes) throw Error(ErrorCode::TooLarge, "blobs are limited to 5 MiB");
  auto id = sha256_hex(bytes);
  if (root_.empty()) {
    memory_.try_emplace(id, bytes);
    return id;
  }
  const auto path = root_ / id;
  if (std::filesystem::exists(path)) return id;
  const auto tmp = root_ / (id + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write blob " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
  return id;
}

std::optional<std::string> BlobStore::get(const std::string& blob_id) const {
  if (root_.empty()) {
    auto it = memory_.find(blob_id);
    if (it == memory_.end()) return std::nullopt;
    return it->second;
  }
  if (blob_id.size() != 64 || blob_id.find_first_not_of("0123456789abcdef") != std::string::npos) return std::nullopt;
  std::ifstream in(root_ / blob_id, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool BlobStore::contains(const std::string& blob_id) const { return get(blob_id).has_value(); }

// ---------------------------------------------------------------------------

Messaging::Key Messaging::key(const std::string& a, const std::string& b) {
  return a < b ? Key{a, b} : Key{b, a};
}

void Messaging::deliver(const ChatMessage& m, bool transient, Millis now) {
  hub_.push(m.to, "Chat", m, now, transient);
}

ChatMessage Messaging::send_chat(const std::string& from, const std::string& to,
                                 const std::string& body, const std::string& blob_id, Millis now) {
  ids_.get(to);
  if (!social_.are_friends(from, to)) throw Error(ErrorCode::NotFriends, "chat is limited to friends");
  if (body.empty() && blob_id.empty()) throw Error(ErrorCode::BadRequest, "chat needs a body or a blob");
  if (!body.empty() && !blob_id.empty()) throw Error(ErrorCode::BadRequest, "chat carries a body or a blob, not both");
  if (utf8_length(body) > kMaxChatChars) throw Error(ErrorCode::BodyTooLarge, "chat bodies are limited to 4096 characters");
  if (!blob_id.empty()) blob(blob_id);

  auto& conv = conversations_[key(from, to)];
  ChatMessage m{conv.next_id++, from, to, body, blob_id, now, false};
  const bool persist = history_saving(from) && history_saving(to);
  if (online(to, now)) {
    m.delivered = true;
    deliver(m, !persist, now);
  } else {
    auto& q = conv.pending[to];
    q.push_back(m);
    if (q.size() > kPendingCap) {
      q.pop_front();
      ++conv.dropped[to];
    }
  }
  if (persist) conv.history.emplace(m.msg_id, m);
  // Echo for the sender's other sessions.
  hub_.push(from, "ChatSent", m, now, !persist);
  return m;
}

void Messaging::set_history_saving(const std::string& user, bool enabled) {
  ids_.get(user);
  saving_[user] = enabled;
}

bool Messaging::history_saving(const std::string& user) const {
  auto it = saving_.find(user);
  return it == saving_.end() || it->second;
}

std::vector<ChatMessage> Messaging::history(const std::string& viewer, const std::string& a,
                                            const std::string& b, std::int64_t before_id,
                                            std::size_t limit) const {
  if (viewer != a && viewer != b) throw Error(ErrorCode::Unauthorized, "not a participant");
  ids_.get(a);
  ids_.get(b);
  std::vector<ChatMessage> out;
  auto it = conversations_.find(key(a, b));
  if (it == conversations_.end()) return out;
  const auto& h = it->second.history;
  for (auto m = std::make_reverse_iterator(h.lower_bound(before_id)); m != h.rend() && out.size() < limit; ++m) {
    out.push_back(m->second);
  }
  return out;
}

std::vector<ChatMessage> Messaging::persisted() const {
  std::vector<ChatMessage> out;
  for (const auto& [_, c] : conversations_) {
    for (const auto& [__, m] : c.history) out.push_back(m);
  }
  return out;
}

bool Messaging::has_pending(const std::string& user) const { return pending_count(user) > 0; }

std::size_t Messaging::pending_count(const std::string& user) const {
  std::size_t n = 0;
  for (const auto& [k, c] : conversations_) {
    if (k.first != user && k.second != user) continue;
    if (auto it = c.pending.find(user); it != c.pending.end()) n += it->second.size();
  }
  return n;
}

std::size_t Messaging::flush_pending(const std::string& user, Millis now) {
  // Merge across conversations by send time; FIFO holds within each.
  std::vector<std::pair<Key, ChatMessage>> held;
  for (auto& [k, c] : conversations_) {
    if (k.first != user && k.second != user) continue;
    auto it = c.pending.find(user);
    if (it == c.pending.end()) continue;
    if (auto d = c.dropped.find(user); d != c.dropped.end()) {
      const auto& peer = k.first == user ? k.second : k.first;
      hub_.push(user, "ChatGap", json{{"peer", peer}, {"dropped", d->second}}, now);
      c.dropped.erase(d);
    }
    for (auto& m : it->second) held.emplace_back(k, std::move(m));
    c.pending.erase(it);
  }
  std::stable_sort(held.begin(), held.end(),
                   [](const auto& x, const auto& y) { return x.second.sent_at < y.second.sent_at; });
  for (auto& [k, m] : held) {
    m.delivered = true;
    auto& hist = conversations_[k].history;
    auto h = hist.find(m.msg_id);
    if (h != hist.end()) h->second.delivered = true;
    deliver(m, h == hist.end(), now);
  }
  return held.size();
}

Mail Messaging::send_mail(const std::string& from, const std::string& to, const std::string& subject,
                          const std::string& body, Millis now) {
  ids_.get(to);
  if (utf8_length(subject) > kMaxSubjectChars) throw Error(ErrorCode::BodyTooLarge, "mail subjects are limited to 256 characters");
  utf8_length(body);
  if (body.size() > kMaxMailBytes) throw Error(ErrorCode::BodyTooLarge, "mail bodies are limited to 64 KiB");
  Mail m{next_mail_++, from, to, subject, body, now, false, false, false};
  mails_.emplace(m.mail_id, m);
  hub_.push(to, "MailArrived", json{{"mail_id", m.mail_id}, {"from", from}, {"subject", subject}}, now);
  return m;
}

std::vector<Mail> Messaging::list_mail(const std::string& user, const std::string& box) const {
  if (box != "inbox" && box != "sent") throw Error(ErrorCode::InvalidField, "box must be inbox or sent");
  std::vector<Mail> out;
  for (auto it = mails_.rbegin(); it != mails_.rend(); ++it) {
    const auto& m = it->second;
    if (box == "inbox" && m.to == user && !m.deleted_by_recipient) out.push_back(m);
    if (box == "sent" && m.from == user && !m.deleted_by_sender) out.push_back(m);
  }
  return out;
}

std::size_t Messaging::unread_count(const std::string& user) const {
  return static_cast<std::size_t>(std::count_if(mails_.begin(), mails_.end(), [&](const auto& kv) {
    return kv.second.to == user && !kv.second.read && !kv.second.deleted_by_recipient;
  }));
}

Mail& Messaging::mail_for(const std::string& user, std::int64_t mail_id) {
  auto it = mails_.find(mail_id);
  if (it == mails_.end()) throw Error(ErrorCode::UnknownMail, "no such mail");
  auto& m = it->second;
  if (m.from != user && m.to != user) throw Error(ErrorCode::NotYourMail, "mail belongs to other users");
  const bool gone = (m.to == user && m.deleted_by_recipient) || (m.from == user && m.to != user && m.deleted_by_sender) ||
                    (m.from == user && m.to == user && m.deleted_by_sender && m.deleted_by_recipient);
  if (gone) throw Error(ErrorCode::UnknownMail, "mail was deleted");
  return m;
}

Mail Messaging::read_mail(const std::string& user, std::int64_t mail_id) {
  auto& m = mail_for(user, mail_id);
  if (m.to == user) m.read = true;
  return m;
}

void Messaging::delete_mail(const std::string& user, std::int64_t mail_id) {
  auto& m = mail_for(user, mail_id);
  if (m.from == user) m.deleted_by_sender = true;
  if (m.to == user) m.deleted_by_recipient = true;
}

void Messaging::put_blob(const BlobInfo& info) { blobs_.try_emplace(info.blob_id, info); }

const BlobInfo& Messaging::blob(const std::string& blob_id) const {
  auto it = blobs_.find(blob_id);
  if (it == blobs_.end()) throw Error(ErrorCode::UnknownBlob, "no such blob");
  return it->second;
}

bool Messaging::has_blob(const std::string& blob_id) const { return blobs_.contains(blob_id); }

void Messaging::notify_friends(const std::string& user, bool is_online, Millis now) {
  json payload{{"user_id", user}, {"online", is_online}, {"last_seen", last_seen_.at(user)}};
  for (const auto& f : social_.friends_of(user)) hub_.push(f.user_id, "Presence", payload, now);
}

bool Messaging::heartbeat(const std::string& user, const std::string& token, Millis now) {
  heartbeats_[user][token] = now;
  last_seen_[user] = std::max(last_seen_[user], now);
  if (announced_.contains(user)) return false;
  announced_.insert(user);
  notify_friends(user, true, now);
  return true;
}

bool Messaging::online(const std::string& user, Millis now) const {
  auto it = heartbeats_.find(user);
  if (it == heartbeats_.end()) return false;
  for (const auto& [token, at] : it->second) {
    if (now - at <= kLivenessWindow && ids_.session_valid(token, now)) return true;
  }
  return false;
}

Presence Messaging::presence(const std::string& user, Millis now) const {
  Presence p{user, ids_.find(user) != nullptr, false, std::nullopt};
  if (!p.exists) return p;
  p.online = online(user, now);
  if (auto it = last_seen_.find(user); it != last_seen_.end()) p.last_seen = it->second;
  return p;
}

std::vector<std::string> Messaging::stale_online(Millis now) const {
  std::vector<std::string> out;
  for (const auto& u : announced_) {
    if (!online(u, now)) out.push_back(u);
  }
  return out;
}

std::vector<std::string> Messaging::sweep(Millis now) {
  auto gone = stale_online(now);
  for (const auto& u : gone) {
    announced_.erase(u);
    // Forget heartbeats that can never count again.
    std::erase_if(heartbeats_[u], [&](const auto& kv) { return now - kv.second > kLivenessWindow; });
    notify_friends(u, false, now);
  }
  return gone;
}

json Messaging::snapshot() const {
  json convs = json::array();
  for (const auto& [k, c] : conversations_) {
    json hist = json::array();
    for (const auto& [_, m] : c.history) hist.push_back(m);
    json pending = json::object(), dropped = json::object();
    for (const auto& [u, q] : c.pending) pending[u] = q;
    for (const auto& [u, n] : c.dropped) dropped[u] = n;
    convs.push_back({{"a", k.first}, {"b", k.second}, {"next_id", c.next_id},
                     {"history", hist}, {"pending", pending}, {"dropped", dropped}});
  }
  json mails = json::array();
  for (const auto& [_, m] : mails_) mails.push_back(m);
  json blobs = json::array();
  for (const auto& [_, b] : blobs_) blobs.push_back({{"blob_id", b.blob_id}, {"size", b.size}, {"media", b.media}});
  return json{{"conversations", convs}, {"saving", saving_},     {"mails", mails},
              {"next_mail", next_mail_},  {"blobs", blobs},       {"heartbeats", heartbeats_},
              {"last_seen", last_seen_},  {"announced", announced_}};
}

void Messaging::restore(const json& j) {
  conversations_.clear();
  mails_.clear();
  blobs_.clear();
  for (const auto& c : j.at("conversations")) {
    auto& conv = conversations_[Key{c.at("a"), c.at("b")}];
    conv.next_id = c.at("next_id");
    for (const auto& m : c.at("history")) {
      auto v = m.get<ChatMessage>();
      conv.history.emplace(v.msg_id, v);
    }
    for (const auto& [u, q] : c.at("pending").items()) {
      for (const auto& m : q) conv.pending[u].push_back(m.get<ChatMessage>());
    }
    for (const auto& [u, n] : c.at("dropped").items()) conv.dropped[u] = n.get<std::size_t>();
  }
  saving_ = j.at("saving").get<std::map<std::string, bool>>();
  for (const auto& m : j.at("mails")) {
    auto v = mail_from_json(m);
    mails_.emplace(v.mail_id, v);
  }
  next_mail_ = j.at("next_mail");
  for (const auto& b : j.at("blobs")) {
    BlobInfo info{b.at("blob_id"), b.at("size"), b.at("media")};
    blobs_.emplace(info.blob_id, info);
  }
  heartbeats_ = j.at("heartbeats").get<std::map<std::string, std::map<std::string, Millis>>>();
  last_seen_ = j.at("last_seen").get<std::map<std::string, Millis>>();
  announced_ = j.at("announced").get<std::set<std::string>>();
}

}  // namespace lbs::messaging
