#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "harness.hpp"
#include "lbs/identity.hpp"

using namespace lbs;
using namespace lbs::identity;
using lbs::testing::Harness;
using lbs::testing::kEpoch;
using lbs::gateway::Request;

namespace {

RegisterForm alice_form() {
  return {"alice", "pw", "Alice", "alice@example.org", "13800000000", "Female", "Dalian", "China", {"Music", " hiking "}};
}

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

}  // namespace

TEST(Validate, RequiredFields) {
  auto f = alice_form();
  f.nickname.clear();
  EXPECT_EQ(code_of([&] { validate(f); }), ErrorCode::MissingField);
  f = alice_form();
  f.email = "no-at-sign";
  EXPECT_EQ(code_of([&] { validate(f); }), ErrorCode::InvalidEmail);
  f = alice_form();
  f.phone = "1234";
  EXPECT_EQ(code_of([&] { validate(f); }), ErrorCode::InvalidPhone);
  f.phone = "12a45";
  EXPECT_EQ(code_of([&] { validate(f); }), ErrorCode::InvalidPhone);
  f.phone = std::string(21, '1');
  EXPECT_EQ(code_of([&] { validate(f); }), ErrorCode::InvalidPhone);
  f = alice_form();
  f.username = "has space";
  EXPECT_EQ(code_of([&] { validate(f); }), ErrorCode::InvalidUsername);
  f = alice_form();
  f.gender = "robot";
  EXPECT_EQ(code_of([&] { validate(f); }), ErrorCode::InvalidField);
}

TEST(Identity, RegisterIssuesOneSixDigitCode) {
  Identity ids;
  const auto& p = ids.register_user(alice_form(), "digest", "012345", kEpoch);
  EXPECT_FALSE(p.activated);
  EXPECT_EQ(p.interests, (std::set<std::string>{"music", "hiking"}));
  const auto codes = ids.codes_of(p.user_id);
  ASSERT_EQ(codes.size(), 1u);
  EXPECT_EQ(codes[0].code, "012345");
  EXPECT_EQ(codes[0].expires_at, kEpoch + kCodeLifetime);
}

TEST(Identity, DuplicateUsernameIsCaseInsensitive) {
  Identity ids;
  ids.register_user(alice_form(), "d", "111111", kEpoch);
  auto f = alice_form();
  EXPECT_EQ(code_of([&] { ids.register_user(f, "d", "222222", kEpoch); }), ErrorCode::DuplicateUsername);
  f.username = "ALICE";
  EXPECT_EQ(code_of([&] { ids.register_user(f, "d", "222222", kEpoch); }), ErrorCode::DuplicateUsername);
}

TEST(Identity, ActivationCodes) {
  Identity ids;
  ids.register_user(alice_form(), "d", "111111", kEpoch);
  EXPECT_EQ(code_of([&] { ids.activate("alice", "999999", kEpoch); }), ErrorCode::BadCode);
  EXPECT_FALSE(ids.find_by_username("alice")->activated);
  ids.activate("alice", "111111", kEpoch + 1000);
  EXPECT_TRUE(ids.find_by_username("alice")->activated);
  EXPECT_EQ(code_of([&] { ids.activate("alice", "111111", kEpoch + 2000); }), ErrorCode::AlreadyActivated);
}

TEST(Identity, ActivationCodeExpires) {
  Identity ids;
  ids.register_user(alice_form(), "d", "111111", kEpoch);
  EXPECT_EQ(code_of([&] { ids.activate("alice", "111111", kEpoch + kCodeLifetime + 1); }), ErrorCode::Expired);
}

TEST(Identity, SessionsExpire) {
  Identity ids;
  const auto id = ids.register_user(alice_form(), "d", "111111", kEpoch).user_id;
  ids.activate("alice", "111111", kEpoch);
  ids.open_session(id, "tok", kEpoch, kDefaultSessionTtl);
  EXPECT_EQ(ids.authenticate("tok", kEpoch + kDefaultSessionTtl - 1), id);
  EXPECT_EQ(code_of([&] { ids.authenticate("tok", kEpoch + kDefaultSessionTtl); }), ErrorCode::Unauthorized);
  EXPECT_EQ(code_of([&] { ids.authenticate("nope", kEpoch); }), ErrorCode::Unauthorized);
  EXPECT_EQ(ids.prune_sessions(kEpoch + kDefaultSessionTtl), 1u);
}

TEST(Identity, UsernameIsImmutable) {
  Identity ids;
  const auto id = ids.register_user(alice_form(), "d", "111111", kEpoch).user_id;
  EXPECT_EQ(code_of([&] { ids.update_profile(id, "basic", {{"username", "mallory"}}); }), ErrorCode::ImmutableField);
  EXPECT_EQ(code_of([&] { ids.update_profile(id, "basic", {{"user_id", "u9"}}); }), ErrorCode::ImmutableField);
  EXPECT_EQ(code_of([&] { ids.update_profile(id, "basic", {{"shoe_size", 9}}); }), ErrorCode::InvalidField);
  EXPECT_EQ(code_of([&] { ids.update_profile(id, "hobbies", {{"nickname", "x"}}); }), ErrorCode::InvalidField);
  const auto change = ids.update_profile(id, "basic", {{"nickname", "Ally"}});
  EXPECT_TRUE(change.other_changed);
  EXPECT_FALSE(change.avatar_changed);
  EXPECT_EQ(ids.get(id).nickname, "Ally");
}

TEST(Identity, SnapshotRoundTrip) {
  Identity ids;
  const auto id = ids.register_user(alice_form(), "d", "111111", kEpoch).user_id;
  ids.activate("alice", "111111", kEpoch);
  ids.open_session(id, "tok", kEpoch);
  Identity copy;
  copy.restore(ids.snapshot());
  EXPECT_EQ(copy.snapshot(), ids.snapshot());
  EXPECT_EQ(copy.authenticate("tok", kEpoch), id);
}

// --- through the platform ------------------------------------------------------

TEST(Accounts, DuplicateRegistrationReported) {
  Harness h;
  h.signup("alice");
  auto again = h.form("alice");
  EXPECT_EQ(h.fail("register", {}, again), "DuplicateUsername");
  again["username"] = "Alice";
  EXPECT_EQ(h.fail("register", {}, again), "DuplicateUsername");
}

TEST(Accounts, IdShapedUsernamesReserved) {
  Harness h;
  EXPECT_EQ(h.fail("register", {}, h.form("u12")), "InvalidUsername");
  EXPECT_EQ(h.fail("register", {}, h.form("u12x")), "");
}

TEST(Accounts, LoginErrors) {
  Harness h;
  h.call("register", {}, h.form("bob"));
  EXPECT_EQ(h.fail("login", {}, {{"username", "bob"}, {"password", lbs::testing::kPassword}}), "NotActivated");
  h.call("activate", {}, {{"username", "bob"}, {"code", *h.sms.last_code(h.phones["bob"])}});
  try {
    h.login("bob", "wrong");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadCredentials);
    EXPECT_TRUE(e.recovery_hint());
  }
  EXPECT_EQ(h.fail("login", {}, {{"username", "nobody"}, {"password", "x"}}), "BadCredentials");
  const auto token = h.login("bob");
  EXPECT_EQ(token.size(), 22u);
}

TEST(Accounts, SessionExpiresAfterTtl) {
  Harness h;
  const auto t = h.signup("bob");
  h.clock.advance(identity::kDefaultSessionTtl);
  EXPECT_EQ(h.fail("profile_get", t), "Unauthorized");
}

TEST(Accounts, RecoveryFlow) {
  Harness h;
  const auto old_session = h.signup("bob");
  h.call("recover", {}, {{"username", "bob"}});
  const auto code = *h.sms.last_code(h.phones["bob"]);
  EXPECT_EQ(h.fail("redeem", {}, {{"username", "bob"}, {"code", code == "000000" ? "000001" : "000000"}, {"new_password", "n"}}),
            "BadCode");
  h.call("redeem", {}, {{"username", "bob"}, {"code", code}, {"new_password", "new secret"}});
  EXPECT_EQ(h.fail("login", {}, {{"username", "bob"}, {"password", lbs::testing::kPassword}}), "BadCredentials");
  EXPECT_FALSE(h.login("bob", "new secret").empty());
  EXPECT_EQ(h.fail("profile_get", old_session), "Unauthorized");
  EXPECT_EQ(h.fail("recover", {}, {{"username", "ghost"}}), "UnknownUser");
}

TEST(Accounts, RecoveryCodeExpires) {
  Harness h;
  h.signup("bob");
  h.call("recover", {}, {{"username", "bob"}});
  const auto code = *h.sms.last_code(h.phones["bob"]);
  h.clock.advance(identity::kCodeLifetime + 1);
  EXPECT_EQ(h.fail("redeem", {}, {{"username", "bob"}, {"code", code}, {"new_password", "n"}}), "Expired");
}

TEST(Accounts, PasswordNeverStoredInClear) {
  Harness h;
  h.signup("bob");
  const auto dump = h.platform->state_dump();
  EXPECT_EQ(dump.find(lbs::testing::kPassword), std::string::npos);
  for (const auto& m : h.sms.messages()) EXPECT_EQ(m.text.find(lbs::testing::kPassword), std::string::npos);
}

TEST(Accounts, ProfileUpdateAndAvatarEvent) {
  Harness h;
  const auto t = h.signup("alice");
  h.call("profile_update", t, {{"section", "basic"}, {"fields", {{"nickname", "Ally"}}}});
  EXPECT_EQ(h.call("profile_get", t).at("nickname"), "Ally");
  EXPECT_EQ(h.fail("profile_update", t, {{"section", "basic"}, {"fields", {{"username", "x"}}}}), "ImmutableField");
  const auto blob = h.platform->call("blob_upload", Request{t, json::object(), "PNGDATA", "image/png"}).ok;
  h.call("profile_update", t, {{"section", "basic"}, {"fields", {{"avatar", blob.at("blob_id")}}}});
  const auto events = h.platform->inspect([](const gateway::State& s) { return s.content.all_events(); });
  const auto avatar_events = std::count_if(events.begin(), events.end(), [](const auto& e) {
    return e.kind == content::FeedKind::AvatarChanged;
  });
  EXPECT_EQ(avatar_events, 1);
  EXPECT_EQ(h.fail("profile_update", t, {{"section", "basic"}, {"fields", {{"avatar", "feedface"}}}}), "UnknownBlob");
}

TEST(Accounts, ConcurrentRegistrationOfOneNameHasOneWinner) {
  for (int round = 0; round < 5; ++round) {
    Harness h;
    std::atomic<int> wins{0}, dupes{0};
    std::vector<json> forms;
    for (int i = 0; i < 16; ++i) forms.push_back(h.form(i % 2 ? "Racer" : "racer"));
    std::vector<std::thread> threads;
    for (int i = 0; i < 16; ++i) {
      threads.emplace_back([&, i] {
        const auto& f = forms[i];
        try {
          h.platform->call("register", Request{{}, f});
          ++wins;
        } catch (const Error& e) {
          if (e.code() == ErrorCode::DuplicateUsername) ++dupes;
        }
      });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(wins.load(), 1);
    EXPECT_EQ(dupes.load(), 15);
  }
}
