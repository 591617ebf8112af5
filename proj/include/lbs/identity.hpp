#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lbs/error.hpp"
#include "lbs/json.hpp"

namespace lbs::identity {

inline constexpr Millis kCodeLifetime = 15 * 60 * 1000;
inline constexpr Millis kDefaultSessionTtl = 24 * 60 * 60 * 1000;

enum class Gender { Male, Female, Unspecified };
std::string_view to_string(Gender g);
/// Throws InvalidField for anything but Male/Female/Unspecified (any case).
Gender gender_from_string(std::string_view s);

struct Profile {
  std::string user_id;
  std::string username;
  std::string password_digest;
  std::string nickname;
  std::string email;
  std::string phone;
  Gender gender = Gender::Unspecified;
  std::optional<std::string> birthday;  // YYYY-MM-DD
  std::string avatar;                   // blob id, empty when unset
  std::set<std::string> interests;      // lowercase tags
  std::string status_text;
  std::string city;
  std::string country;
  bool is_admin = false;
  bool activated = false;
  Millis created_at = 0;

  friend bool operator==(const Profile&, const Profile&) = default;
};

struct Session {
  std::string token;
  std::string user_id;
  Millis created_at = 0;
  Millis expires_at = 0;

  friend bool operator==(const Session&, const Session&) = default;
};

enum class CodePurpose { Activation, Recovery };

struct OneTimeCode {
  std::string code;
  std::string user_id;
  CodePurpose purpose = CodePurpose::Activation;
  Millis expires_at = 0;
  bool consumed = false;

  friend bool operator==(const OneTimeCode&, const OneTimeCode&) = default;
};

struct RegisterForm {
  std::string username;
  std::string password;
  std::string nickname;
  std::string email;
  std::string phone;
  std::string gender;
  std::string city;
  std::string country;
  std::vector<std::string> interests;
};

/// Field checks shared by the API layer and the state machine. Throws
/// MissingField, InvalidUsername, InvalidEmail, InvalidPhone or InvalidField.
void validate(const RegisterForm& form);
bool valid_username(std::string_view s);
std::string normalize_tag(std::string_view tag);

struct ProfileChange {
  bool avatar_changed = false;
  bool other_changed = false;
};

/// Accounts, sessions and one-time codes. Every mutator is deterministic:
/// digests, codes, tokens and timestamps are resolved by the caller.
class Identity {
 public:
  /// Throws DuplicateUsername (case-insensitive) plus the validate() errors.
  const Profile& register_user(const RegisterForm& form, const std::string& digest,
                               const std::string& activation_code, Millis now);

  void activate(const std::string& username, const std::string& code, Millis now);

  /// Returns the user id when `password` matches. Throws BadCredentials (with
  /// recovery hint) or NotActivated. Read-only.
  std::string check_credentials(const std::string& username, const std::string& password) const;
  const Session& open_session(const std::string& user_id, const std::string& token, Millis now,
                              Millis ttl = kDefaultSessionTtl);
  bool close_session(const std::string& token);

  /// Throws Unauthorized for unknown or expired tokens.
  std::string authenticate(const std::string& token, Millis now) const;
  bool session_valid(const std::string& token, Millis now) const;
  std::vector<Session> sessions_of(const std::string& user_id) const;
  std::size_t prune_sessions(Millis now);
  bool has_expired_sessions(Millis now) const;

  /// Issues a recovery code; returns the user id. Throws UnknownUser.
  std::string start_recovery(const std::string& username, const std::string& code, Millis now);
  /// Checks a recovery code without consuming it (BadCode, Expired, UnknownUser).
  void check_recovery(const std::string& username, const std::string& code, Millis now) const;
  /// Replaces the digest, consumes the code and drops every session.
  void redeem_recovery(const std::string& username, const std::string& code,
                       const std::string& new_digest, Millis now);

  /// `section` is basic, contact or location. Throws ImmutableField for
  /// username/user_id, InvalidField for unknown keys or sections.
  ProfileChange update_profile(const std::string& user_id, const std::string& section,
                               const json& fields);
  void set_admin(const std::string& user_id, bool admin);

  const Profile* find(const std::string& user_id) const;
  const Profile* find_by_username(const std::string& username) const;
  const Profile& get(const std::string& user_id) const;  // throws UnknownUser
  std::vector<const Profile*> all() const;
  std::size_t size() const { return users_.size(); }

  /// Codes issued for a user, newest last (tests and the admin tooling).
  std::vector<OneTimeCode> codes_of(const std::string& user_id) const;

  json snapshot() const;
  void restore(const json& j);

 private:
  Profile& mut(const std::string& user_id);
  OneTimeCode* live_code(const std::string& user_id, CodePurpose purpose);
  void check_code(const Profile& p, CodePurpose purpose, const std::string& code, Millis now) const;

  std::map<std::string, Profile> users_;
  std::map<std::string, std::string> by_name_;  // lowercase username -> id
  std::map<std::string, Session> sessions_;
  std::vector<OneTimeCode> codes_;
  std::uint64_t next_user_ = 1;
};

void to_json(json& j, const Profile& p);
void from_json(const json& j, Profile& p);
void to_json(json& j, const Session& s);
void from_json(const json& j, Session& s);
void to_json(json& j, const OneTimeCode& c);
void from_json(const json& j, OneTimeCode& c);

/// Profile as the owner sees it: everything except the digest.
json public_view(const Profile& p);

}  // namespace lbs::identity
