#include "lbs/content.hpp"

#include <algorithm>
#include <tuple>

#include "lbs/messaging.hpp"

namespace lbs::content {

std::string_view to_string(FeedKind k) {
  switch (k) {
    case FeedKind::AvatarChanged: return "AvatarChanged";
    case FeedKind::BlogPublished: return "BlogPublished";
    case FeedKind::PhotosUploaded: return "PhotosUploaded";
    case FeedKind::ProfileUpdated: return "ProfileUpdated";
  }
  return "ProfileUpdated";
}

FeedKind feed_kind_from_string(std::string_view s) {
  for (auto k : {FeedKind::AvatarChanged, FeedKind::BlogPublished, FeedKind::PhotosUploaded, FeedKind::ProfileUpdated}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidField, "unknown feed kind");
}

std::string_view to_string(BlogState s) { return s == BlogState::Draft ? "Draft" : "Published"; }

std::string_view to_string(TargetKind k) {
  switch (k) {
    case TargetKind::Event: return "event";
    case TargetKind::Blog: return "blog";
    case TargetKind::Photo: return "photo";
  }
  return "event";
}

TargetKind target_kind_from_string(std::string_view s) {
  for (auto k : {TargetKind::Event, TargetKind::Blog, TargetKind::Photo}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidField, "comment target must be event, blog or photo");
}

void to_json(json& j, const Comment& c) {
  j = json{{"comment_id", c.comment_id}, {"author", c.author}, {"text", c.text}, {"at", c.at}};
}

void to_json(json& j, const FeedEvent& e) {
  j = json{{"event_id", e.event_id},       {"actor", e.actor},
           {"kind", std::string(to_string(e.kind))}, {"subject", e.subject},
           {"count", e.count},             {"occurred_at", e.occurred_at},
           {"comments", e.comments},       {"comment_count", e.comments.size()}};
}

void to_json(json& j, const BlogPost& p) {
  j = json{{"post_id", p.post_id},
           {"author", p.author},
           {"title", p.title},
           {"body", p.body},
           {"state", std::string(to_string(p.state))},
           {"created_at", p.created_at},
           {"published_at", p.published_at ? json(*p.published_at) : json(nullptr)},
           {"comments", p.comments}};
}

void to_json(json& j, const Photo& p) {
  j = json{{"photo_id", p.photo_id}, {"album_id", p.album_id},     {"blob_id", p.blob_id},
           {"caption", p.caption},   {"created_at", p.created_at}, {"comments", p.comments}};
}

void to_json(json& j, const Album& a) {
  j = json{{"album_id", a.album_id}, {"owner", a.owner}, {"title", a.title},
           {"photos", a.photos},     {"created_at", a.created_at}};
}

void to_json(json& j, const Visit& v) { j = json{{"visitor", v.visitor}, {"visited_at", v.visited_at}}; }

namespace {

std::vector<Comment> comments_from(const json& j) {
  std::vector<Comment> out;
  for (const auto& c : j) out.push_back(Comment{c.at("comment_id"), c.at("author"), c.at("text"), c.at("at")});
  return out;
}

void check_text(const std::string& text, std::size_t max, const char* what) {
  if (messaging::utf8_length(text) > max) {
    throw Error(ErrorCode::TooLong, std::string(what) + " is limited to " + std::to_string(max) + " characters");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

const FeedEvent& Content::append_event(const std::string& actor, FeedKind kind,
                                       const std::string& subject, std::int64_t count, Millis now) {
  FeedEvent e{next_event_++, actor, kind, subject, count, now, {}};
  cursors_[e.event_id] = now;
  const auto& stored = events_.emplace(e.event_id, std::move(e)).first->second;
  json delta{{"event_id", stored.event_id}, {"actor", actor}, {"kind", std::string(to_string(kind))}};
  for (const auto& f : social_.friends_of(actor)) hub_.push(f.user_id, "FeedEvent", delta, now);
  return stored;
}

bool Content::event_visible(const std::string& viewer, const FeedEvent& e) const {
  return e.actor == viewer || social_.are_friends(viewer, e.actor);
}

std::vector<FeedEvent> Content::friend_feed(const std::string& viewer, std::int64_t before,
                                            std::size_t limit) const {
  std::vector<const FeedEvent*> all;
  for (const auto& [_, e] : events_) {
    if (event_visible(viewer, e)) all.push_back(&e);
  }
  auto newer = [](const FeedEvent* a, const FeedEvent* b) {
    return std::tie(a->occurred_at, a->event_id) > std::tie(b->occurred_at, b->event_id);
  };
  std::sort(all.begin(), all.end(), newer);
  std::size_t start = 0;
  if (before > 0) {
    auto c = cursors_.find(before);
    if (c == cursors_.end()) throw Error(ErrorCode::NotFound, "unknown feed cursor");
    const auto key = std::make_tuple(c->second, before);
    while (start < all.size() && std::tie(all[start]->occurred_at, all[start]->event_id) >= key) ++start;
  }
  std::vector<FeedEvent> out;
  for (auto i = start; i < all.size() && out.size() < limit; ++i) out.push_back(*all[i]);
  return out;
}

std::vector<FeedEvent> Content::all_events() const {
  std::vector<FeedEvent> out;
  for (const auto& [_, e] : events_) out.push_back(e);
  return out;
}

std::vector<Comment>& Content::comment_list(const std::string& user, TargetKind kind, const std::string& id) {
  switch (kind) {
    case TargetKind::Event: {
      std::int64_t n = 0;
      try {
        n = std::stoll(id);
      } catch (const std::exception&) {
        throw Error(ErrorCode::NotVisible, "no such event");
      }
      auto it = events_.find(n);
      if (it == events_.end() || !event_visible(user, it->second)) throw Error(ErrorCode::NotVisible, "event not visible");
      return it->second.comments;
    }
    case TargetKind::Blog: {
      auto it = blogs_.find(id);
      if (it == blogs_.end() || (it->second.state == BlogState::Draft && it->second.author != user)) {
        throw Error(ErrorCode::NotVisible, "blog not visible");
      }
      return it->second.comments;
    }
    case TargetKind::Photo: {
      auto it = photos_.find(id);
      if (it == photos_.end()) throw Error(ErrorCode::NotVisible, "photo not visible");
      return it->second.comments;
    }
  }
  throw Error(ErrorCode::NotVisible, "unknown target");
}

Comment Content::comment(const std::string& user, TargetKind kind, const std::string& target_id,
                         const std::string& text, Millis now) {
  auto& list = comment_list(user, kind, target_id);
  if (text.empty()) throw Error(ErrorCode::MissingField, "comment text is empty");
  check_text(text, kMaxCommentChars, "comment");
  Comment c{next_comment_++, user, text, now};
  list.push_back(c);
  return c;
}

std::vector<Comment> Content::comments(const std::string& user, TargetKind kind,
                                       const std::string& target_id) const {
  return const_cast<Content*>(this)->comment_list(user, kind, target_id);
}

const BlogPost& Content::blog_write(const std::string& author, const std::string& title,
                                    const std::string& body, Millis now) {
  if (title.empty()) throw Error(ErrorCode::MissingField, "blog title is empty");
  check_text(title, 256, "title");
  messaging::utf8_length(body);
  BlogPost p{"b" + std::to_string(next_blog_++), author, title, body, BlogState::Draft, now, std::nullopt, {}};
  return blogs_.emplace(p.post_id, std::move(p)).first->second;
}

BlogPost& Content::own_blog(const std::string& author, const std::string& post_id) {
  auto it = blogs_.find(post_id);
  if (it == blogs_.end()) throw Error(ErrorCode::NotFound, "no such blog post");
  if (it->second.author != author) throw Error(ErrorCode::Unauthorized, "only the author may change a post");
  return it->second;
}

const BlogPost& Content::blog_publish(const std::string& author, const std::string& post_id, Millis now) {
  auto& p = own_blog(author, post_id);
  if (p.state == BlogState::Published) throw Error(ErrorCode::AlreadyPublished, "post is already published");
  p.state = BlogState::Published;
  p.published_at = now;
  append_event(author, FeedKind::BlogPublished, post_id, 1, now);
  return p;
}

const BlogPost& Content::blog_edit(const std::string& author, const std::string& post_id,
                                   const std::optional<std::string>& title,
                                   const std::optional<std::string>& body) {
  auto& p = own_blog(author, post_id);
  if (title) {
    if (title->empty()) throw Error(ErrorCode::MissingField, "blog title is empty");
    check_text(*title, 256, "title");
  }
  if (body) messaging::utf8_length(*body);
  if (title) p.title = *title;
  if (body) p.body = *body;
  return p;
}

void Content::erase_events(FeedKind kind, const std::string& subject) {
  std::erase_if(events_, [&](const auto& kv) { return kv.second.kind == kind && kv.second.subject == subject; });
}

void Content::blog_delete(const std::string& author, const std::string& post_id) {
  own_blog(author, post_id);
  blogs_.erase(post_id);
  erase_events(FeedKind::BlogPublished, post_id);
}

const BlogPost& Content::blog_view(const std::string& viewer, const std::string& post_id) const {
  auto it = blogs_.find(post_id);
  if (it == blogs_.end() || (it->second.state == BlogState::Draft && it->second.author != viewer)) {
    throw Error(ErrorCode::NotVisible, "blog not visible");
  }
  return it->second;
}

std::vector<BlogPost> Content::blog_list(const std::string& viewer, const std::string& author) const {
  std::vector<BlogPost> out;
  for (const auto& [_, p] : blogs_) {
    if (p.author != author) continue;
    if (p.state == BlogState::Draft && p.author != viewer) continue;
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.created_at > b.created_at; });
  return out;
}

const Album& Content::album_create(const std::string& owner, const std::string& title, Millis now) {
  if (title.empty()) throw Error(ErrorCode::MissingField, "album title is empty");
  check_text(title, 256, "title");
  Album a{"a" + std::to_string(next_album_++), owner, title, {}, now};
  return albums_.emplace(a.album_id, std::move(a)).first->second;
}

const Album& Content::album(const std::string& album_id) const {
  auto it = albums_.find(album_id);
  if (it == albums_.end()) throw Error(ErrorCode::UnknownAlbum, "no such album");
  return it->second;
}

void Content::album_delete(const std::string& owner, const std::string& album_id) {
  const auto& a = album(album_id);
  if (a.owner != owner) throw Error(ErrorCode::Unauthorized, "only the owner may delete an album");
  for (const auto& p : a.photos) photos_.erase(p);
  erase_events(FeedKind::PhotosUploaded, album_id);
  albums_.erase(album_id);
}

std::vector<Album> Content::albums_of(const std::string& owner) const {
  std::vector<Album> out;
  for (const auto& [_, a] : albums_) {
    if (a.owner == owner) out.push_back(a);
  }
  return out;
}

std::vector<Photo> Content::photos_in(const std::string& album_id) const {
  std::vector<Photo> out;
  for (const auto& id : album(album_id).photos) out.push_back(photos_.at(id));
  return out;
}

std::vector<Photo> Content::photo_upload(const std::string& owner, const std::string& album_id,
                                         const std::vector<PhotoInput>& photos,
                                         const BlobCheck& blob_exists, Millis now) {
  const auto& a = album(album_id);
  if (a.owner != owner) throw Error(ErrorCode::Unauthorized, "only the owner may add photos");
  if (photos.empty()) throw Error(ErrorCode::MissingField, "no photos given");
  for (const auto& p : photos) {
    if (!blob_exists(p.blob_id)) throw Error(ErrorCode::UnknownBlob, "no such blob: " + p.blob_id);
    check_text(p.caption, 1024, "caption");
  }
  std::vector<Photo> out;
  for (const auto& in : photos) {
    Photo p{"p" + std::to_string(next_photo_++), album_id, in.blob_id, in.caption, now, {}};
    albums_.at(album_id).photos.push_back(p.photo_id);
    photos_.emplace(p.photo_id, p);
    out.push_back(p);
  }
  append_event(owner, FeedKind::PhotosUploaded, album_id, static_cast<std::int64_t>(out.size()), now);
  return out;
}

Photo& Content::own_photo(const std::string& owner, const std::string& photo_id) {
  auto it = photos_.find(photo_id);
  if (it == photos_.end()) throw Error(ErrorCode::UnknownPhoto, "no such photo");
  if (albums_.at(it->second.album_id).owner != owner) throw Error(ErrorCode::Unauthorized, "only the owner may change a photo");
  return it->second;
}

const Photo& Content::photo_edit(const std::string& owner, const std::string& photo_id,
                                 const std::string& caption) {
  auto& p = own_photo(owner, photo_id);
  check_text(caption, 1024, "caption");
  p.caption = caption;
  return p;
}

void Content::photo_delete(const std::string& owner, const std::string& photo_id) {
  auto& p = own_photo(owner, photo_id);
  std::erase(albums_.at(p.album_id).photos, photo_id);
  photos_.erase(photo_id);
}

void Content::record_visit(const std::string& owner, const std::string& visitor, Millis now) {
  if (owner == visitor) return;
  auto& ring = visits_[owner];
  std::erase_if(ring, [&](const Visit& v) { return v.visitor == visitor; });
  ring.push_front(Visit{visitor, now});
  while (ring.size() > kVisitorCap) ring.pop_back();
}

std::vector<Visit> Content::visitors(const std::string& owner) const {
  auto it = visits_.find(owner);
  if (it == visits_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

json Content::snapshot() const {
  json events = json::array(), blogs = json::array(), albums = json::array(), photos = json::array();
  for (const auto& [_, e] : events_) events.push_back(e);
  for (const auto& [_, b] : blogs_) blogs.push_back(b);
  for (const auto& [_, a] : albums_) albums.push_back(a);
  for (const auto& [_, p] : photos_) photos.push_back(p);
  json visits = json::object();
  for (const auto& [owner, ring] : visits_) visits[owner] = ring;
  json cursors = json::array();
  for (const auto& [id, at] : cursors_) cursors.push_back(json::array({id, at}));
  return json{{"events", events},
              {"cursors", cursors},
              {"blogs", blogs},
              {"albums", albums},
              {"photos", photos},
              {"visits", visits},
              {"next", {next_event_, next_comment_, next_blog_, next_album_, next_photo_}}};
}

void Content::restore(const json& j) {
  events_.clear();
  cursors_.clear();
  blogs_.clear();
  albums_.clear();
  photos_.clear();
  visits_.clear();
  for (const auto& e : j.at("events")) {
    FeedEvent v{e.at("event_id"), e.at("actor"), feed_kind_from_string(e.at("kind").get<std::string>()),
                e.at("subject"), e.at("count"), e.at("occurred_at"), comments_from(e.at("comments"))};
    events_.emplace(v.event_id, std::move(v));
  }
  for (const auto& c : j.at("cursors")) cursors_[c.at(0).get<std::int64_t>()] = c.at(1).get<Millis>();
  for (const auto& b : j.at("blogs")) {
    BlogPost p{b.at("post_id"), b.at("author"), b.at("title"), b.at("body"),
               b.at("state") == "Draft" ? BlogState::Draft : BlogState::Published,
               b.at("created_at"), std::nullopt, comments_from(b.at("comments"))};
    if (!b.at("published_at").is_null()) p.published_at = b.at("published_at").get<Millis>();
    blogs_.emplace(p.post_id, std::move(p));
  }
  for (const auto& a : j.at("albums")) {
    Album v{a.at("album_id"), a.at("owner"), a.at("title"), a.at("photos"), a.at("created_at")};
    albums_.emplace(v.album_id, std::move(v));
  }
  for (const auto& p : j.at("photos")) {
    Photo v{p.at("photo_id"), p.at("album_id"), p.at("blob_id"), p.at("caption"), p.at("created_at"),
            comments_from(p.at("comments"))};
    photos_.emplace(v.photo_id, std::move(v));
  }
  for (const auto& [owner, ring] : j.at("visits").items()) {
    for (const auto& v : ring) visits_[owner].push_back(Visit{v.at("visitor"), v.at("visited_at")});
  }
  const auto& n = j.at("next");
  next_event_ = n.at(0);
  next_comment_ = n.at(1);
  next_blog_ = n.at(2);
  next_album_ = n.at(3);
  next_photo_ = n.at(4);
}

}  // namespace lbs::content
