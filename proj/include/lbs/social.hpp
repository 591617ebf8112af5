#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lbs/geostore.hpp"
#include "lbs/identity.hpp"

namespace lbs::social {

inline constexpr double kDecayDistance = 10'000.0;  // D0 in meters
inline constexpr const char* kMyFriends = "My Friends";
inline constexpr const char* kStrangers = "Strangers";

enum class Tier { Everyone, FriendsOnly, Nobody };
enum class FieldGroup { Phone, Gender, Birthday, Email, Location, Status };
inline constexpr std::array kFieldGroups = {FieldGroup::Phone,    FieldGroup::Gender,
                                            FieldGroup::Birthday, FieldGroup::Email,
                                            FieldGroup::Location, FieldGroup::Status};

std::string_view to_string(Tier t);
std::string_view to_string(FieldGroup f);
Tier tier_from_string(std::string_view s);               // InvalidField
FieldGroup field_group_from_string(std::string_view s);  // InvalidField

/// Profile keys governed by each field group. Keys outside every group are
/// either always public (user_id, username, nickname, avatar, interests) or
/// owner-only (is_admin, activated, created_at).
const std::vector<std::string>& keys_of(FieldGroup f);

struct PrivacyPolicy {
  std::map<FieldGroup, Tier> tiers;
  static PrivacyPolicy defaults();
  Tier tier(FieldGroup f) const { return tiers.at(f); }
};

/// The visibility rule on its own, for a single field group.
bool visible(Tier tier, bool is_owner, bool is_friend);

struct Group {
  std::string group_id;
  std::string owner;
  std::string name;
  bool is_default = false;
};

struct FriendEntry {
  std::string user_id;
  std::string group_id;
  std::string alias;
};

struct Recommendation {
  std::string user_id;
  std::string username;
  double score = 0.0;
  std::size_t shared_interest_count = 0;
};

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

struct NearbyEntry {
  std::string user_id;
  json view;
  loc::Fix fix;
  double distance = 0.0;
  bool online = false;
};

/// Friend graph, groups and privacy policies. Not synchronized: the caller
/// serializes mutations (the platform writer lock does).
class Social {
 public:
  explicit Social(const identity::Identity& ids) : ids_(ids) {}

  /// Creates the default groups and privacy policy for a new account.
  void init_user(const std::string& user_id);

  /// Returns true when the request completed a friendship immediately (the
  /// target had already asked for it).
  bool request_friend(const std::string& from, const std::string& to);
  void accept_friend(const std::string& me, const std::string& from,
                     const std::optional<std::string>& group_name = std::nullopt);
  void decline_friend(const std::string& me, const std::string& from);
  void remove_friend(const std::string& me, const std::string& other);
  void move_to_group(const std::string& me, const std::string& friend_id, const std::string& group_name);
  void set_alias(const std::string& me, const std::string& friend_id, const std::string& alias);

  const Group& create_group(const std::string& owner, const std::string& name);
  void rename_group(const std::string& owner, const std::string& name, const std::string& new_name);
  void delete_group(const std::string& owner, const std::string& name);
  std::vector<Group> groups_of(const std::string& owner) const;

  bool are_friends(const std::string& a, const std::string& b) const;
  std::vector<FriendEntry> friends_of(const std::string& user_id) const;
  std::vector<std::string> incoming_requests(const std::string& user_id) const;
  std::vector<std::string> outgoing_requests(const std::string& user_id) const;

  void set_privacy(const std::string& user_id, const json& tiers);
  const PrivacyPolicy& privacy_of(const std::string& user_id) const;
  bool can_see(const std::string& viewer, const std::string& owner, FieldGroup f) const;

  /// Redacts a profile view for `viewer`; removed keys are absent.
  json filter_view(const std::string& viewer, const std::string& owner, json view) const;
  json filter_profile(const std::string& viewer, const std::string& owner) const;

  std::vector<Recommendation> recommend(const std::string& viewer, std::size_t k,
                                        const geostore::GeoStore& store) const;
  /// Throws NoFixForViewer when the viewer has no stored position.
  std::vector<NearbyEntry> visible_nearby(const std::string& viewer, double radius, bool friends_only,
                                          const geostore::GeoStore& store) const;
  /// Matches on username substring, city (when visible) and interest tag.
  /// Empty criteria match everyone.
  std::vector<json> search(const std::string& viewer, const std::string& username,
                           const std::string& city, const std::string& interest) const;

  /// Both directions of every edge exist and no user befriends itself.
  bool audit() const;

  json snapshot() const;
  void restore(const json& j);

 private:
  const Group& group_named(const std::string& owner, const std::string& name) const;
  const Group* find_group_named(const std::string& owner, const std::string& name) const;
  std::string default_group(const std::string& owner, const char* name) const;
  void require_user(const std::string& id) const;
  void link(const std::string& a, const std::string& b, const std::string& a_group);

  const identity::Identity& ids_;
  std::map<std::string, Group> groups_;
  std::map<std::string, std::vector<std::string>> group_order_;  // owner -> group ids
  std::map<std::string, std::map<std::string, FriendEntry>> edges_;
  std::set<std::pair<std::string, std::string>> requests_;  // (from, to)
  std::map<std::string, PrivacyPolicy> policies_;
  std::uint64_t next_group_ = 1;
};

}  // namespace lbs::social
