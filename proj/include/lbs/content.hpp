#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lbs/events.hpp"
#include "lbs/social.hpp"

namespace lbs::content {

inline constexpr std::size_t kMaxCommentChars = 1024;
inline constexpr std::size_t kVisitorCap = 50;

enum class FeedKind { AvatarChanged, BlogPublished, PhotosUploaded, ProfileUpdated };
std::string_view to_string(FeedKind k);
FeedKind feed_kind_from_string(std::string_view s);

enum class BlogState { Draft, Published };
std::string_view to_string(BlogState s);

enum class TargetKind { Event, Blog, Photo };
std::string_view to_string(TargetKind k);
TargetKind target_kind_from_string(std::string_view s);  // InvalidField

struct Comment {
  std::int64_t comment_id = 0;
  std::string author;
  std::string text;
  Millis at = 0;
};

struct FeedEvent {
  std::int64_t event_id = 0;
  std::string actor;
  FeedKind kind = FeedKind::ProfileUpdated;
  std::string subject;  // post id, album id, avatar blob id ...
  std::int64_t count = 0;
  Millis occurred_at = 0;
  std::vector<Comment> comments;
};

struct BlogPost {
  std::string post_id;
  std::string author;
  std::string title;
  std::string body;
  BlogState state = BlogState::Draft;
  Millis created_at = 0;
  std::optional<Millis> published_at;
  std::vector<Comment> comments;
};

struct Photo {
  std::string photo_id;
  std::string album_id;
  std::string blob_id;
  std::string caption;
  Millis created_at = 0;
  std::vector<Comment> comments;
};

struct Album {
  std::string album_id;
  std::string owner;
  std::string title;
  std::vector<std::string> photos;
  Millis created_at = 0;
};

struct Visit {
  std::string visitor;
  Millis visited_at = 0;
};

struct PhotoInput {
  std::string blob_id;
  std::string caption;
};

void to_json(json& j, const Comment& c);
void to_json(json& j, const FeedEvent& e);
void to_json(json& j, const BlogPost& p);
void to_json(json& j, const Photo& p);
void to_json(json& j, const Album& a);
void to_json(json& j, const Visit& v);

/// Homepage content: feed events, blogs, albums and the visitor trace.
/// Blogs are readable by any signed-in user once published; feed events only
/// by the actor and the actor's friends.
class Content {
 public:
  using BlobCheck = std::function<bool(const std::string&)>;

  Content(const social::Social& social, events::EventHub& hub) : social_(social), hub_(hub) {}

  const FeedEvent& append_event(const std::string& actor, FeedKind kind, const std::string& subject,
                                std::int64_t count, Millis now);
  /// Newest first by (occurred_at, event_id). `before` is an event id cursor
  /// (0 = from the top).
  std::vector<FeedEvent> friend_feed(const std::string& viewer, std::int64_t before,
                                     std::size_t limit) const;
  std::vector<FeedEvent> all_events() const;

  Comment comment(const std::string& user, TargetKind kind, const std::string& target_id,
                  const std::string& text, Millis now);
  std::vector<Comment> comments(const std::string& user, TargetKind kind,
                                const std::string& target_id) const;

  const BlogPost& blog_write(const std::string& author, const std::string& title,
                             const std::string& body, Millis now);
  const BlogPost& blog_publish(const std::string& author, const std::string& post_id, Millis now);
  const BlogPost& blog_edit(const std::string& author, const std::string& post_id,
                            const std::optional<std::string>& title,
                            const std::optional<std::string>& body);
  void blog_delete(const std::string& author, const std::string& post_id);
  const BlogPost& blog_view(const std::string& viewer, const std::string& post_id) const;
  std::vector<BlogPost> blog_list(const std::string& viewer, const std::string& author) const;

  const Album& album_create(const std::string& owner, const std::string& title, Millis now);
  void album_delete(const std::string& owner, const std::string& album_id);
  const Album& album(const std::string& album_id) const;  // UnknownAlbum
  std::vector<Album> albums_of(const std::string& owner) const;
  std::vector<Photo> photos_in(const std::string& album_id) const;
  std::vector<Photo> photo_upload(const std::string& owner, const std::string& album_id,
                                  const std::vector<PhotoInput>& photos, const BlobCheck& blob_exists,
                                  Millis now);
  const Photo& photo_edit(const std::string& owner, const std::string& photo_id, const std::string& caption);
  void photo_delete(const std::string& owner, const std::string& photo_id);

  void record_visit(const std::string& owner, const std::string& visitor, Millis now);
  std::vector<Visit> visitors(const std::string& owner) const;

  json snapshot() const;
  void restore(const json& j);

 private:
  bool event_visible(const std::string& viewer, const FeedEvent& e) const;
  BlogPost& own_blog(const std::string& author, const std::string& post_id);
  Photo& own_photo(const std::string& owner, const std::string& photo_id);
  std::vector<Comment>& comment_list(const std::string& user, TargetKind kind, const std::string& id);
  void erase_events(FeedKind kind, const std::string& subject);

  const social::Social& social_;
  events::EventHub& hub_;

  std::map<std::int64_t, FeedEvent> events_;
  std::map<std::int64_t, Millis> cursors_;  // every issued event id -> time, survives deletion
  std::map<std::string, BlogPost> blogs_;
  std::map<std::string, Album> albums_;
  std::map<std::string, Photo> photos_;
  std::map<std::string, std::deque<Visit>> visits_;  // newest first
  std::int64_t next_event_ = 1;
  std::int64_t next_comment_ = 1;
  std::int64_t next_blog_ = 1;
  std::int64_t next_album_ = 1;
  std::int64_t next_photo_ = 1;
};

}  // namespace lbs::content
