#include <gtest/gtest.h>

#include <random>

#include "harness.hpp"
#include "lbs/social.hpp"
#include "oracles.hpp"

using namespace lbs;
using namespace lbs::social;
using lbs::testing::kEpoch;

namespace {

struct World {
  identity::Identity ids;
  Social social{ids};
  geostore::GeoStore geo;

  std::string add(const std::string& name, std::vector<std::string> interests = {}, bool activate = true) {
    identity::RegisterForm f{name, "pw", name, name + "@x.org", "1380000000", "Male", "Dalian", "China", std::move(interests)};
    const auto id = ids.register_user(f, "digest", "123456", kEpoch).user_id;
    if (activate) ids.activate(name, "123456", kEpoch);
    ids.update_profile(id, "basic", {{"birthday", "1990-01-02"}, {"status_text", "around"}});
    social.init_user(id);
    return id;
  }

  void friends(const std::string& a, const std::string& b) {
    social.request_friend(a, b);
    social.accept_friend(b, a);
  }

  void place(const std::string& id, double lat, double lon) {
    geo.upsert_position(id, loc::Fix{geo::GeoPoint::make(lat, lon), 10.0, loc::FixMethod::Trilateration, 0.0, kEpoch});
  }
};

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::BadRequest;
}

enum class Relation { Owner, Friend, Stranger };

}  // namespace

// The truth table of the three tiers, stated independently of the code.
TEST(Privacy, TierTruthTable) {
  struct Row {
    Tier tier;
    bool owner, friend_, stranger;
  };
  const Row table[] = {
      {Tier::Everyone, true, true, true},
      {Tier::FriendsOnly, true, true, false},
      {Tier::Nobody, true, false, false},
  };
  for (const auto& r : table) {
    EXPECT_EQ(visible(r.tier, true, false), r.owner);
    EXPECT_EQ(visible(r.tier, true, true), r.owner);
    EXPECT_EQ(visible(r.tier, false, true), r.friend_);
    EXPECT_EQ(visible(r.tier, false, false), r.stranger);
  }
}

TEST(Privacy, ExhaustiveMatrixOverProfileFields) {
  World w;
  const auto owner = w.add("owner");
  const auto pal = w.add("pal");
  const auto stranger = w.add("stranger");
  w.friends(owner, pal);
  for (auto group : kFieldGroups) {
    for (auto tier : {Tier::Everyone, Tier::FriendsOnly, Tier::Nobody}) {
      w.social.set_privacy(owner, {{std::string(to_string(group)), std::string(to_string(tier))}});
      for (auto rel : {Relation::Owner, Relation::Friend, Relation::Stranger}) {
        const auto& viewer = rel == Relation::Owner ? owner : rel == Relation::Friend ? pal : stranger;
        const bool expect = tier == Tier::Everyone || rel == Relation::Owner ||
                            (tier == Tier::FriendsOnly && rel == Relation::Friend);
        const auto view = w.social.filter_profile(viewer, owner);
        for (const auto& key : keys_of(group)) {
          if (key == "fix") continue;  // positions are attached by the caller
          EXPECT_EQ(view.contains(key), expect)
              << to_string(group) << "/" << to_string(tier) << " key " << key << " relation " << static_cast<int>(rel);
        }
        for (const char* always : {"user_id", "username", "nickname", "avatar", "interests"}) {
          EXPECT_TRUE(view.contains(always)) << always;
        }
        EXPECT_EQ(view.contains("is_admin"), rel == Relation::Owner);
        EXPECT_FALSE(view.contains("password_digest"));
      }
    }
  }
}

TEST(Privacy, Defaults) {
  World w;
  const auto a = w.add("a");
  const auto& p = w.social.privacy_of(a);
  EXPECT_EQ(p.tier(FieldGroup::Location), Tier::FriendsOnly);
  EXPECT_EQ(p.tier(FieldGroup::Phone), Tier::FriendsOnly);
  EXPECT_EQ(p.tier(FieldGroup::Birthday), Tier::FriendsOnly);
  EXPECT_EQ(p.tier(FieldGroup::Email), Tier::FriendsOnly);
  EXPECT_EQ(p.tier(FieldGroup::Gender), Tier::Everyone);
  EXPECT_EQ(p.tier(FieldGroup::Status), Tier::Everyone);
}

TEST(Privacy, BadTierRejected) {
  World w;
  const auto a = w.add("a");
  EXPECT_EQ(code_of([&] { w.social.set_privacy(a, {{"phone", "Maybe"}}); }), ErrorCode::InvalidField);
  EXPECT_EQ(code_of([&] { w.social.set_privacy(a, {{"shoe", "Nobody"}}); }), ErrorCode::InvalidField);
}

TEST(Privacy, FilterIsIdempotentAndMonotone) {
  std::mt19937_64 rng(42);
  World w;
  std::vector<std::string> users;
  for (int i = 0; i < 40; ++i) users.push_back(w.add("p" + std::to_string(i)));
  for (int i = 0; i < 60; ++i) {
    const auto a = users[rng() % users.size()], b = users[rng() % users.size()];
    if (a != b && !w.social.are_friends(a, b)) w.friends(a, b);
  }
  const Tier tiers[] = {Tier::Everyone, Tier::FriendsOnly, Tier::Nobody};
  for (int round = 0; round < 1000; ++round) {
    const auto owner = users[rng() % users.size()];
    const auto viewer = users[rng() % users.size()];
    json policy;
    for (auto f : kFieldGroups) policy[std::string(to_string(f))] = std::string(to_string(tiers[rng() % 3]));
    w.social.set_privacy(owner, policy);
    const auto once = w.social.filter_profile(viewer, owner);
    ASSERT_EQ(w.social.filter_view(viewer, owner, once), once);

    // Nobody ⊆ FriendsOnly ⊆ Everyone in terms of who can see one field.
    const auto f = kFieldGroups[rng() % kFieldGroups.size()];
    std::array<int, 3> seen{};
    for (int t = 0; t < 3; ++t) {
      w.social.set_privacy(owner, {{std::string(to_string(f)), std::string(to_string(tiers[t]))}});
      for (const auto& v : users) seen[t] += w.social.can_see(v, owner, f);
    }
    ASSERT_GE(seen[0], seen[1]);
    ASSERT_GE(seen[1], seen[2]);
  }
}

// --- friend graph ------------------------------------------------------------

TEST(Friends, TwoPhaseHandshake) {
  World w;
  const auto a = w.add("a"), b = w.add("b");
  EXPECT_FALSE(w.social.request_friend(a, b));
  EXPECT_FALSE(w.social.are_friends(a, b));
  EXPECT_EQ(w.social.incoming_requests(b), std::vector<std::string>{a});
  w.social.accept_friend(b, a);
  EXPECT_TRUE(w.social.are_friends(a, b));
  EXPECT_TRUE(w.social.are_friends(b, a));
  EXPECT_EQ(code_of([&] { w.social.request_friend(a, b); }), ErrorCode::AlreadyFriends);
  w.social.remove_friend(a, b);
  EXPECT_FALSE(w.social.are_friends(b, a));
  EXPECT_TRUE(w.social.friends_of(a).empty());
  EXPECT_TRUE(w.social.friends_of(b).empty());
}

TEST(Friends, Errors) {
  World w;
  const auto a = w.add("a"), b = w.add("b");
  EXPECT_EQ(code_of([&] { w.social.request_friend(a, a); }), ErrorCode::SelfFriendship);
  EXPECT_EQ(code_of([&] { w.social.request_friend(a, "u999"); }), ErrorCode::UnknownUser);
  EXPECT_EQ(code_of([&] { w.social.accept_friend(b, a); }), ErrorCode::NoPendingRequest);
  EXPECT_EQ(code_of([&] { w.social.remove_friend(a, b); }), ErrorCode::NotFriends);
}

TEST(Friends, MutualRequestsCompleteImmediately) {
  World w;
  const auto a = w.add("a"), b = w.add("b");
  EXPECT_FALSE(w.social.request_friend(a, b));
  EXPECT_TRUE(w.social.request_friend(b, a));
  EXPECT_TRUE(w.social.are_friends(a, b));
  EXPECT_TRUE(w.social.incoming_requests(a).empty());
}

TEST(Friends, SymmetryUnderRandomOperations) {
  std::mt19937_64 rng(9);
  World w;
  std::vector<std::string> users;
  for (int i = 0; i < 12; ++i) users.push_back(w.add("s" + std::to_string(i)));
  std::set<std::pair<std::string, std::string>> model;  // unordered pairs stored sorted
  auto key = [](std::string a, std::string b) { return a < b ? std::pair{a, b} : std::pair{b, a}; };
  for (int step = 0; step < 5000; ++step) {
    const auto a = users[rng() % users.size()], b = users[rng() % users.size()];
    try {
      switch (rng() % 4) {
        case 0:
          if (w.social.request_friend(a, b)) model.insert(key(a, b));
          break;
        case 1:
          w.social.accept_friend(a, b);
          model.insert(key(a, b));
          break;
        case 2:
          w.social.decline_friend(a, b);
          break;
        default:
          w.social.remove_friend(a, b);
          model.erase(key(a, b));
      }
    } catch (const Error&) {
    }
    ASSERT_TRUE(w.social.audit());
    ASSERT_EQ(w.social.are_friends(a, b), model.contains(key(a, b)));
    ASSERT_EQ(w.social.are_friends(a, b), w.social.are_friends(b, a));
  }
  for (const auto& u : users) {
    for (const auto& f : w.social.friends_of(u)) ASSERT_TRUE(model.contains(key(u, f.user_id)));
    ASSERT_FALSE(w.social.are_friends(u, u));
  }
}

TEST(Groups, DefaultsAndFallback) {
  World w;
  const auto a = w.add("a"), b = w.add("b");
  auto names = [&] {
    std::vector<std::string> out;
    for (const auto& g : w.social.groups_of(a)) out.push_back(g.name);
    return out;
  };
  EXPECT_EQ(names(), (std::vector<std::string>{"My Friends", "Strangers"}));
  EXPECT_EQ(code_of([&] { w.social.delete_group(a, "My Friends"); }), ErrorCode::DefaultGroupProtected);
  EXPECT_EQ(code_of([&] { w.social.rename_group(a, "Strangers", "X"); }), ErrorCode::DefaultGroupProtected);
  w.social.create_group(a, "Classmates");
  EXPECT_EQ(code_of([&] { w.social.create_group(a, "Classmates"); }), ErrorCode::DuplicateGroupName);
  w.friends(a, b);
  w.social.move_to_group(a, b, "Classmates");
  const auto classmates = w.social.groups_of(a)[2].group_id;
  EXPECT_EQ(w.social.friends_of(a)[0].group_id, classmates);
  // The other side keeps its own label.
  EXPECT_EQ(w.social.friends_of(b)[0].group_id, w.social.groups_of(b)[0].group_id);
  w.social.delete_group(a, "Classmates");
  EXPECT_EQ(w.social.friends_of(a)[0].group_id, w.social.groups_of(a)[0].group_id);
  EXPECT_EQ(code_of([&] { w.social.move_to_group(a, b, "Nope"); }), ErrorCode::UnknownGroup);
}

TEST(Groups, AliasIsPerSide) {
  World w;
  const auto a = w.add("a"), b = w.add("b");
  w.friends(a, b);
  w.social.set_alias(a, b, "Bobby");
  EXPECT_EQ(w.social.friends_of(a)[0].alias, "Bobby");
  EXPECT_EQ(w.social.friends_of(b)[0].alias, "");
}

// --- recommendation ------------------------------------------------------------

TEST(Recommend, FormulaEndpoints) {
  World w;
  const auto a = w.add("a", {"chess", "music"});
  const auto twin = w.add("twin", {"music", "chess"});
  const auto other = w.add("other", {"golf"});
  w.place(a, 38.9, 121.6);
  w.place(twin, 38.9, 121.6);
  w.place(other, 38.9, 121.6);
  const auto recs = w.social.recommend(a, 10, w.geo);
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].user_id, twin);
  EXPECT_DOUBLE_EQ(recs[0].score, 1.0);
  EXPECT_EQ(recs[0].shared_interest_count, 2u);
}

TEST(Recommend, MatchesBruteForceScoring) {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> tags = {"music", "chess", "hiking", "food", "photography", "film", "tea", "go"};
  World w;
  std::vector<std::string> users;
  std::map<std::string, std::set<std::string>> interests;
  std::map<std::string, std::optional<std::pair<double, double>>> where;
  std::uniform_real_distribution<double> dlat(38.80, 39.00), dlon(121.45, 121.75);
  for (int i = 0; i < 51; ++i) {
    std::vector<std::string> mine;
    for (const auto& t : tags) {
      if (rng() % 3 == 0) mine.push_back(t);
    }
    const auto name = "r" + std::to_string(i);
    const auto id = w.add(name, mine, i % 17 != 5);
    users.push_back(id);
    interests[id] = {mine.begin(), mine.end()};
    if (rng() % 5) {
      const double la = dlat(rng), lo = dlon(rng);
      w.place(id, la, lo);
      where[id] = std::pair{la, lo};
    }
  }
  for (int i = 0; i < 30; ++i) {
    const auto a = users[rng() % users.size()], b = users[rng() % users.size()];
    if (a != b && !w.social.are_friends(a, b) && w.ids.get(a).activated && w.ids.get(b).activated) w.friends(a, b);
  }
  for (const auto& viewer : users) {
    if (!w.ids.get(viewer).activated) continue;
    struct Expected {
      std::string username;
      std::string id;
      double score;
    };
    std::vector<Expected> expected;
    for (const auto& c : users) {
      if (c == viewer || !w.ids.get(c).activated || w.social.are_friends(viewer, c)) continue;
      std::size_t inter = 0;
      for (const auto& t : interests[viewer]) inter += interests[c].count(t);
      const auto uni = interests[viewer].size() + interests[c].size() - inter;
      if (inter == 0) continue;
      double decay = 1.0;
      if (where[viewer] && where[c]) {
        const double d = static_cast<double>(lbs::oracle::law_of_cosines(where[viewer]->first, where[viewer]->second,
                                                                         where[c]->first, where[c]->second));
        decay = std::exp(-d / 10'000.0);
      }
      expected.push_back({w.ids.get(c).username, c, static_cast<double>(inter) / static_cast<double>(uni) * decay});
    }
    std::sort(expected.begin(), expected.end(), [](const auto& x, const auto& y) {
      if (std::abs(x.score - y.score) > 1e-12) return x.score > y.score;
      return x.username < y.username;
    });
    if (expected.size() > 7) expected.resize(7);
    const auto got = w.social.recommend(viewer, 7, w.geo);
    ASSERT_EQ(got.size(), expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].user_id, expected[i].id);
      EXPECT_NEAR(got[i].score, expected[i].score, 1e-9);
      EXPECT_GE(got[i].score, 0.0);
      EXPECT_LE(got[i].score, 1.0);
    }
  }
}

TEST(Recommend, InvariantUnderTagRelabeling) {
  const std::vector<std::vector<std::string>> sets = {
      {"a", "b", "c"}, {"a", "b"}, {"c", "d"}, {"a", "d", "e"}, {"b"}, {"e", "f", "a"}};
  auto ranking = [&](const std::map<std::string, std::string>& rename) {
    World w;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      std::vector<std::string> tags;
      for (const auto& t : sets[i]) tags.push_back(rename.at(t));
      ids.push_back(w.add("x" + std::to_string(i), tags));
    }
    std::vector<std::string> out;
    for (const auto& r : w.social.recommend(ids[0], 10, w.geo)) out.push_back(r.user_id);
    return out;
  };
  const std::map<std::string, std::string> identity_map = {{"a", "a"}, {"b", "b"}, {"c", "c"}, {"d", "d"}, {"e", "e"}, {"f", "f"}};
  const std::map<std::string, std::string> shuffled = {{"a", "zeta"}, {"b", "kappa"}, {"c", "alpha"}, {"d", "omega"}, {"e", "mu"}, {"f", "pi"}};
  EXPECT_EQ(ranking(identity_map), ranking(shuffled));
}

// --- nearby ------------------------------------------------------------------------

TEST(Nearby, ExclusionRules) {
  World w;
  const auto me = w.add("me"), pal = w.add("pal"), hidden = w.add("hidden");
  w.friends(me, pal);
  w.friends(me, hidden);
  w.social.set_privacy(hidden, {{"location", "Nobody"}});
  for (const auto& id : {me, pal, hidden}) w.place(id, 38.9, 121.6);
  const auto got = w.social.visible_nearby(me, 1000, false, w.geo);
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].user_id, pal);
  EXPECT_EQ(got[0].view.at("nickname"), "pal");
  World empty;
  const auto lonely = empty.add("lonely");
  EXPECT_EQ(code_of([&] { empty.social.visible_nearby(lonely, 1000, false, empty.geo); }), ErrorCode::NoFixForViewer);
}

TEST(Nearby, MatchesBruteForceOn200Users) {
  std::mt19937_64 rng(77);
  World w;
  std::vector<std::string> users;
  std::map<std::string, std::pair<double, double>> where;
  std::uniform_real_distribution<double> dlat(38.85, 38.95), dlon(121.55, 121.67);
  const Tier tiers[] = {Tier::Everyone, Tier::FriendsOnly, Tier::Nobody};
  for (int i = 0; i < 200; ++i) {
    const auto id = w.add("n" + std::to_string(i));
    users.push_back(id);
    const double la = dlat(rng), lo = dlon(rng);
    w.place(id, la, lo);
    where[id] = {la, lo};
    w.social.set_privacy(id, {{"location", std::string(to_string(tiers[rng() % 3]))}});
  }
  for (int i = 0; i < 300; ++i) {
    const auto a = users[rng() % users.size()], b = users[rng() % users.size()];
    if (a != b && !w.social.are_friends(a, b)) w.friends(a, b);
  }
  for (int q = 0; q < 40; ++q) {
    const auto viewer = users[rng() % users.size()];
    const double radius = 500.0 + static_cast<double>(rng() % 4000);
    const bool friends_only = rng() % 2;
    std::set<std::string> expected;
    for (const auto& u : users) {
      if (u == viewer) continue;
      const double d = static_cast<double>(
          lbs::oracle::law_of_cosines(where[viewer].first, where[viewer].second, where[u].first, where[u].second));
      if (std::abs(d - radius) < 1e-3) continue;  // too close to the boundary to judge
      if (d > radius) continue;
      const bool fr = w.social.are_friends(viewer, u);
      if (friends_only && !fr) continue;
      if (!visible(w.social.privacy_of(u).tier(FieldGroup::Location), false, fr)) continue;
      expected.insert(u);
    }
    std::set<std::string> got;
    for (const auto& n : w.social.visible_nearby(viewer, radius, friends_only, w.geo)) got.insert(n.user_id);
    EXPECT_EQ(got, expected);
  }
}

TEST(Search, RespectsLocationTier) {
  World w;
  const auto me = w.add("me"), a = w.add("anna", {"chess"}), b = w.add("annabel");
  w.social.set_privacy(b, {{"location", "Everyone"}});
  (void)a;
  EXPECT_EQ(w.social.search(me, "ann", "", "").size(), 2u);
  // anna keeps location FriendsOnly, so a city search cannot reveal her.
  const auto by_city = w.social.search(me, "", "dalian", "");
  ASSERT_EQ(by_city.size(), 1u);
  EXPECT_EQ(by_city[0].at("username"), "annabel");
  EXPECT_EQ(w.social.search(me, "", "", "Chess").size(), 1u);
}

TEST(SocialState, SnapshotRoundTrip) {
  World w;
  const auto a = w.add("a"), b = w.add("b"), c = w.add("c");
  w.friends(a, b);
  w.social.request_friend(c, a);
  w.social.create_group(a, "Work");
  w.social.set_privacy(b, {{"phone", "Nobody"}});
  Social copy(w.ids);
  copy.restore(w.social.snapshot());
  EXPECT_EQ(copy.snapshot(), w.social.snapshot());
  EXPECT_TRUE(copy.are_friends(b, a));
}
