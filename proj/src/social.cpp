#include "lbs/social.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace lbs::social {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

const std::set<std::string>& owner_only_keys() {
  static const std::set<std::string> keys = {"is_admin", "activated", "created_at"};
  return keys;
}

}  // namespace

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::Everyone: return "Everyone";
    case Tier::FriendsOnly: return "FriendsOnly";
    case Tier::Nobody: return "Nobody";
  }
  return "Nobody";
}

std::string_view to_string(FieldGroup f) {
  switch (f) {
    case FieldGroup::Phone: return "phone";
    case FieldGroup::Gender: return "gender";
    case FieldGroup::Birthday: return "birthday";
    case FieldGroup::Email: return "email";
    case FieldGroup::Location: return "location";
    case FieldGroup::Status: return "status";
  }
  return "status";
}

Tier tier_from_string(std::string_view s) {
  for (auto t : {Tier::Everyone, Tier::FriendsOnly, Tier::Nobody}) {
    if (lower(to_string(t)) == lower(s)) return t;
  }
  throw Error(ErrorCode::InvalidField, "tier must be Everyone, FriendsOnly or Nobody");
}

FieldGroup field_group_from_string(std::string_view s) {
  for (auto f : kFieldGroups) {
    if (to_string(f) == lower(s)) return f;
  }
  throw Error(ErrorCode::InvalidField, "unknown privacy field group: " + std::string(s));
}

const std::vector<std::string>& keys_of(FieldGroup f) {
  static const std::map<FieldGroup, std::vector<std::string>> keys = {
      {FieldGroup::Phone, {"phone"}},
      {FieldGroup::Gender, {"gender"}},
      {FieldGroup::Birthday, {"birthday"}},
      {FieldGroup::Email, {"email"}},
      {FieldGroup::Location, {"city", "country", "fix"}},
      {FieldGroup::Status, {"status_text"}},
  };
  return keys.at(f);
}

PrivacyPolicy PrivacyPolicy::defaults() {
  return PrivacyPolicy{{{FieldGroup::Phone, Tier::FriendsOnly},
                        {FieldGroup::Gender, Tier::Everyone},
                        {FieldGroup::Birthday, Tier::FriendsOnly},
                        {FieldGroup::Email, Tier::FriendsOnly},
                        {FieldGroup::Location, Tier::FriendsOnly},
                        {FieldGroup::Status, Tier::Everyone}}};
}

bool visible(Tier tier, bool is_owner, bool is_friend) {
  if (is_owner) return true;
  switch (tier) {
    case Tier::Everyone: return true;
    case Tier::FriendsOnly: return is_friend;
    case Tier::Nobody: return false;
  }
  return false;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : a) shared += b.count(t);
  return static_cast<double>(shared) / static_cast<double>(a.size() + b.size() - shared);
}

void Social::require_user(const std::string& id) const { ids_.get(id); }

void Social::init_user(const std::string& user_id) {
  if (group_order_.contains(user_id)) return;
  for (const char* name : {kMyFriends, kStrangers}) {
    Group g{"g" + std::to_string(next_group_++), user_id, name, true};
    group_order_[user_id].push_back(g.group_id);
    groups_.emplace(g.group_id, g);
  }
  policies_[user_id] = PrivacyPolicy::defaults();
}

std::string Social::default_group(const std::string& owner, const char* name) const {
  return group_named(owner, name).group_id;
}

const Group* Social::find_group_named(const std::string& owner, const std::string& name) const {
  auto it = group_order_.find(owner);
  if (it == group_order_.end()) return nullptr;
  const auto key = lower(name);
  for (const auto& id : it->second) {
    const auto& g = groups_.at(id);
    if (lower(g.name) == key) return &g;
  }
  return nullptr;
}

const Group& Social::group_named(const std::string& owner, const std::string& name) const {
  const auto* g = find_group_named(owner, name);
  if (!g) throw Error(ErrorCode::UnknownGroup, "no group named '" + name + "'");
  return *g;
}

void Social::link(const std::string& a, const std::string& b, const std::string& a_group) {
  edges_[a][b] = FriendEntry{b, a_group, ""};
}

bool Social::request_friend(const std::string& from, const std::string& to) {
  require_user(to);
  if (from == to) throw Error(ErrorCode::SelfFriendship, "cannot befriend yourself");
  if (are_friends(from, to)) throw Error(ErrorCode::AlreadyFriends, "already friends");
  if (requests_.contains({to, from})) {
    accept_friend(from, to);
    return true;
  }
  requests_.insert({from, to});
  return false;
}

void Social::accept_friend(const std::string& me, const std::string& from,
                           const std::optional<std::string>& group_name) {
  require_user(from);
  if (me == from) throw Error(ErrorCode::SelfFriendship, "cannot befriend yourself");
  if (are_friends(me, from)) throw Error(ErrorCode::AlreadyFriends, "already friends");
  if (!requests_.contains({from, me})) throw Error(ErrorCode::NoPendingRequest, "no pending request from that user");
  const auto my_group = group_name ? group_named(me, *group_name).group_id : default_group(me, kMyFriends);
  requests_.erase({from, me});
  requests_.erase({me, from});
  link(me, from, my_group);
  link(from, me, default_group(from, kMyFriends));
}

void Social::decline_friend(const std::string& me, const std::string& from) {
  if (requests_.erase({from, me}) == 0) throw Error(ErrorCode::NoPendingRequest, "no pending request from that user");
}

void Social::remove_friend(const std::string& me, const std::string& other) {
  require_user(other);
  if (!are_friends(me, other)) throw Error(ErrorCode::NotFriends, "not friends");
  edges_[me].erase(other);
  edges_[other].erase(me);
}

void Social::move_to_group(const std::string& me, const std::string& friend_id,
                           const std::string& group_name) {
  if (!are_friends(me, friend_id)) throw Error(ErrorCode::NotFriends, "not friends");
  edges_[me][friend_id].group_id = group_named(me, group_name).group_id;
}

void Social::set_alias(const std::string& me, const std::string& friend_id, const std::string& alias) {
  if (!are_friends(me, friend_id)) throw Error(ErrorCode::NotFriends, "not friends");
  edges_[me][friend_id].alias = alias;
}

const Group& Social::create_group(const std::string& owner, const std::string& name) {
  require_user(owner);
  if (name.empty() || name.size() > 64) throw Error(ErrorCode::InvalidField, "group name must be 1-64 characters");
  if (find_group_named(owner, name)) throw Error(ErrorCode::DuplicateGroupName, "group '" + name + "' exists");
  Group g{"g" + std::to_string(next_group_++), owner, name, false};
  group_order_[owner].push_back(g.group_id);
  return groups_.emplace(g.group_id, g).first->second;
}

void Social::rename_group(const std::string& owner, const std::string& name, const std::string& new_name) {
  const auto& g = group_named(owner, name);
  if (g.is_default) throw Error(ErrorCode::DefaultGroupProtected, "default groups cannot be renamed");
  if (new_name.empty() || new_name.size() > 64) throw Error(ErrorCode::InvalidField, "group name must be 1-64 characters");
  if (const auto* other = find_group_named(owner, new_name); other && other != &g) {
    throw Error(ErrorCode::DuplicateGroupName, "group '" + new_name + "' exists");
  }
  groups_.at(g.group_id).name = new_name;
}

void Social::delete_group(const std::string& owner, const std::string& name) {
  const auto g = group_named(owner, name);
  if (g.is_default) throw Error(ErrorCode::DefaultGroupProtected, "default groups cannot be deleted");
  const auto fallback = default_group(owner, kMyFriends);
  for (auto& [_, e] : edges_[owner]) {
    if (e.group_id == g.group_id) e.group_id = fallback;
  }
  std::erase(group_order_[owner], g.group_id);
  groups_.erase(g.group_id);
}

std::vector<Group> Social::groups_of(const std::string& owner) const {
  std::vector<Group> out;
  if (auto it = group_order_.find(owner); it != group_order_.end()) {
    for (const auto& id : it->second) out.push_back(groups_.at(id));
  }
  return out;
}

bool Social::are_friends(const std::string& a, const std::string& b) const {
  auto it = edges_.find(a);
  return it != edges_.end() && it->second.contains(b);
}

std::vector<FriendEntry> Social::friends_of(const std::string& user_id) const {
  std::vector<FriendEntry> out;
  if (auto it = edges_.find(user_id); it != edges_.end()) {
    for (const auto& [_, e] : it->second) out.push_back(e);
  }
  return out;
}

std::vector<std::string> Social::incoming_requests(const std::string& user_id) const {
  std::vector<std::string> out;
  for (const auto& [from, to] : requests_) {
    if (to == user_id) out.push_back(from);
  }
  return out;
}

std::vector<std::string> Social::outgoing_requests(const std::string& user_id) const {
  std::vector<std::string> out;
  for (const auto& [from, to] : requests_) {
    if (from == user_id) out.push_back(to);
  }
  return out;
}

void Social::set_privacy(const std::string& user_id, const json& tiers) {
  if (!tiers.is_object()) throw Error(ErrorCode::BadRequest, "privacy must be an object");
  auto next = privacy_of(user_id);
  for (const auto& [key, value] : tiers.items()) {
    if (!value.is_string()) throw Error(ErrorCode::InvalidField, "tier must be a string");
    next.tiers[field_group_from_string(key)] = tier_from_string(value.get<std::string>());
  }
  policies_[user_id] = next;
}

const PrivacyPolicy& Social::privacy_of(const std::string& user_id) const {
  auto it = policies_.find(user_id);
  if (it == policies_.end()) throw Error(ErrorCode::UnknownUser, "no such user: " + user_id);
  return it->second;
}

bool Social::can_see(const std::string& viewer, const std::string& owner, FieldGroup f) const {
  return visible(privacy_of(owner).tier(f), viewer == owner, are_friends(viewer, owner));
}

json Social::filter_view(const std::string& viewer, const std::string& owner, json view) const {
  if (viewer == owner) return view;
  for (const auto& k : owner_only_keys()) view.erase(k);
  for (auto f : kFieldGroups) {
    if (can_see(viewer, owner, f)) continue;
    for (const auto& k : keys_of(f)) view.erase(k);
  }
  return view;
}

json Social::filter_profile(const std::string& viewer, const std::string& owner) const {
  return filter_view(viewer, owner, identity::public_view(ids_.get(owner)));
}

std::vector<Recommendation> Social::recommend(const std::string& viewer, std::size_t k,
                                              const geostore::GeoStore& store) const {
  const auto& me = ids_.get(viewer);
  const auto my_pos = store.get(viewer);
  std::vector<Recommendation> out;
  for (const auto* p : ids_.all()) {
    if (p->user_id == viewer || !p->activated || are_friends(viewer, p->user_id)) continue;
    const double j = jaccard(me.interests, p->interests);
    if (j <= 0.0) continue;
    double decay = 1.0;
    if (my_pos) {
      if (auto their = store.get(p->user_id)) {
        decay = std::exp(-geo::haversine(my_pos->fix.position, their->fix.position) / kDecayDistance);
      }
    }
    const double score = j * decay;
    if (score <= 0.0) continue;
    std::size_t shared = 0;
    for (const auto& t : me.interests) shared += p->interests.count(t);
    out.push_back({p->user_id, p->username, score, shared});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.username < b.username;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

std::vector<NearbyEntry> Social::visible_nearby(const std::string& viewer, double radius,
                                                bool friends_only,
                                                const geostore::GeoStore& store) const {
  const auto me = store.get(viewer);
  if (!me) throw Error(ErrorCode::NoFixForViewer, "submit a position before querying nearby users");
  std::vector<NearbyEntry> out;
  for (const auto& n : store.query_radius(me->fix.position, radius)) {
    const auto& id = n.record.user_id;
    if (id == viewer) continue;
    if (friends_only && !are_friends(viewer, id)) continue;
    if (!can_see(viewer, id, FieldGroup::Location)) continue;
    auto view = filter_profile(viewer, id);
    view["fix"] = n.record.fix;
    out.push_back({id, std::move(view), n.record.fix, n.distance, n.record.online});
  }
  return out;
}

std::vector<json> Social::search(const std::string& viewer, const std::string& username,
                                 const std::string& city, const std::string& interest) const {
  const auto name_key = lower(username);
  const auto city_key = lower(city);
  const auto tag = identity::normalize_tag(interest);
  std::vector<json> out;
  for (const auto* p : ids_.all()) {
    if (p->user_id == viewer || !p->activated) continue;
    if (!name_key.empty() && lower(p->username).find(name_key) == std::string::npos) continue;
    if (!city_key.empty() &&
        (lower(p->city) != city_key || !can_see(viewer, p->user_id, FieldGroup::Location))) {
      continue;
    }
    if (!tag.empty() && !p->interests.contains(tag)) continue;
    out.push_back(filter_profile(viewer, p->user_id));
  }
  return out;
}

bool Social::audit() const {
  for (const auto& [a, row] : edges_) {
    for (const auto& [b, e] : row) {
      if (a == b || e.user_id != b) return false;
      auto back = edges_.find(b);
      if (back == edges_.end() || !back->second.contains(a)) return false;
      auto g = groups_.find(e.group_id);
      if (g == groups_.end() || g->second.owner != a) return false;
    }
  }
  return true;
}

json Social::snapshot() const {
  json groups = json::array();
  for (const auto& [owner, ids] : group_order_) {
    for (const auto& id : ids) {
      const auto& g = groups_.at(id);
      groups.push_back({{"group_id", g.group_id}, {"owner", g.owner}, {"name", g.name}, {"is_default", g.is_default}});
    }
  }
  json edges = json::array();
  for (const auto& [a, row] : edges_) {
    for (const auto& [b, e] : row) edges.push_back({{"from", a}, {"to", b}, {"group_id", e.group_id}, {"alias", e.alias}});
  }
  json requests = json::array();
  for (const auto& [from, to] : requests_) requests.push_back(json::array({from, to}));
  json policies = json::object();
  for (const auto& [user, p] : policies_) {
    json tiers = json::object();
    for (const auto& [f, t] : p.tiers) tiers[std::string(to_string(f))] = std::string(to_string(t));
    policies[user] = tiers;
  }
  return json{{"groups", groups},
              {"edges", edges},
              {"requests", requests},
              {"policies", policies},
              {"next_group", next_group_}};
}

void Social::restore(const json& j) {
  groups_.clear();
  group_order_.clear();
  edges_.clear();
  requests_.clear();
  policies_.clear();
  for (const auto& g : j.at("groups")) {
    Group v{g.at("group_id"), g.at("owner"), g.at("name"), g.at("is_default")};
    group_order_[v.owner].push_back(v.group_id);
    groups_.emplace(v.group_id, v);
  }
  for (const auto& e : j.at("edges")) {
    edges_[e.at("from")][e.at("to")] = FriendEntry{e.at("to"), e.at("group_id"), e.at("alias")};
  }
  for (const auto& r : j.at("requests")) requests_.emplace(r.at(0).get<std::string>(), r.at(1).get<std::string>());
  for (const auto& [user, tiers] : j.at("policies").items()) {
    PrivacyPolicy p;
    for (const auto& [f, t] : tiers.items()) p.tiers[field_group_from_string(f)] = tier_from_string(t.get<std::string>());
    policies_[user] = p;
  }
  next_group_ = j.at("next_group").get<std::uint64_t>();
}

}  // namespace lbs::social
