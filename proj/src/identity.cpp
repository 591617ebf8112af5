#include "lbs/identity.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include "lbs/crypto.hpp"

namespace lbs::identity {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

void check_email(const std::string& email) {
  const auto at = email.find('@');
  if (at == std::string::npos || at == 0 || at + 1 == email.size() ||
      email.find('@', at + 1) != std::string::npos) {
    throw Error(ErrorCode::InvalidEmail, "email must look like name@host");
  }
}

void check_phone(const std::string& phone) {
  if (phone.size() < 5 || phone.size() > 20 ||
      !std::all_of(phone.begin(), phone.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw Error(ErrorCode::InvalidPhone, "phone must be 5-20 digits");
  }
}

void check_birthday(const std::string& d) {
  int y = 0, m = 0, day = 0;
  char tail = 0;
  if (d.size() != 10 || std::sscanf(d.c_str(), "%4d-%2d-%2d%c", &y, &m, &day, &tail) != 3 || m < 1 ||
      m > 12 || day < 1 || day > 31) {
    throw Error(ErrorCode::InvalidField, "birthday must be YYYY-MM-DD");
  }
}

std::string_view to_string(CodePurpose p) {
  return p == CodePurpose::Activation ? "activation" : "recovery";
}

}  // namespace

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::Male: return "Male";
    case Gender::Female: return "Female";
    case Gender::Unspecified: return "Unspecified";
  }
  return "Unspecified";
}

Gender gender_from_string(std::string_view s) {
  const auto l = lower(s);
  if (l == "male") return Gender::Male;
  if (l == "female") return Gender::Female;
  if (l == "unspecified") return Gender::Unspecified;
  throw Error(ErrorCode::InvalidField, "gender must be Male, Female or Unspecified");
}

bool valid_username(std::string_view s) {
  if (s.empty() || s.size() > 32) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.' || c == '-';
  });
}

std::string normalize_tag(std::string_view tag) {
  auto b = tag.find_first_not_of(" \t");
  auto e = tag.find_last_not_of(" \t");
  if (b == std::string_view::npos) return {};
  return lower(tag.substr(b, e - b + 1));
}

void validate(const RegisterForm& f) {
  const std::pair<const char*, const std::string*> required[] = {
      {"username", &f.username}, {"password", &f.password}, {"nickname", &f.nickname},
      {"email", &f.email},       {"phone", &f.phone},       {"gender", &f.gender}};
  for (const auto& [name, value] : required) {
    if (blank(*value)) throw Error(ErrorCode::MissingField, std::string("missing field: ") + name);
  }
  if (!valid_username(f.username)) {
    throw Error(ErrorCode::InvalidUsername, "username must be 1-32 of [A-Za-z0-9_.-]");
  }
  check_email(f.email);
  check_phone(f.phone);
  gender_from_string(f.gender);
}

const Profile& Identity::register_user(const RegisterForm& form, const std::string& digest,
                                       const std::string& activation_code, Millis now) {
  validate(form);
  const auto key = lower(form.username);
  if (by_name_.contains(key)) {
    throw Error(ErrorCode::DuplicateUsername, "username '" + form.username + "' is taken");
  }
  Profile p;
  p.user_id = "u" + std::to_string(next_user_++);
  p.username = form.username;
  p.password_digest = digest;
  p.nickname = form.nickname;
  p.email = form.email;
  p.phone = form.phone;
  p.gender = gender_from_string(form.gender);
  p.city = form.city;
  p.country = form.country;
  for (const auto& t : form.interests) {
    if (auto n = normalize_tag(t); !n.empty()) p.interests.insert(n);
  }
  p.created_at = now;
  by_name_.emplace(key, p.user_id);
  codes_.push_back(OneTimeCode{activation_code, p.user_id, CodePurpose::Activation, now + kCodeLifetime, false});
  return users_.emplace(p.user_id, std::move(p)).first->second;
}

void Identity::check_code(const Profile& p, CodePurpose purpose, const std::string& code,
                          Millis now) const {
  for (auto it = codes_.rbegin(); it != codes_.rend(); ++it) {
    if (it->user_id != p.user_id || it->purpose != purpose || it->code != code) continue;
    if (it->consumed) break;
    if (now > it->expires_at) throw Error(ErrorCode::Expired, "code has expired");
    return;
  }
  throw Error(ErrorCode::BadCode, "code does not match");
}

OneTimeCode* Identity::live_code(const std::string& user_id, CodePurpose purpose) {
  for (auto it = codes_.rbegin(); it != codes_.rend(); ++it) {
    if (it->user_id == user_id && it->purpose == purpose && !it->consumed) return &*it;
  }
  return nullptr;
}

void Identity::activate(const std::string& username, const std::string& code, Millis now) {
  const auto* p = find_by_username(username);
  if (!p) throw Error(ErrorCode::UnknownUser, "no such user");
  if (p->activated) throw Error(ErrorCode::AlreadyActivated, "account is already active");
  check_code(*p, CodePurpose::Activation, code, now);
  for (auto& c : codes_) {
    if (c.user_id == p->user_id && c.purpose == CodePurpose::Activation && c.code == code) c.consumed = true;
  }
  mut(p->user_id).activated = true;
}

std::string Identity::check_credentials(const std::string& username,
                                        const std::string& password) const {
  const auto* p = find_by_username(username);
  if (!p || !PasswordHasher::verify(password, p->password_digest)) {
    throw Error(ErrorCode::BadCredentials, "wrong username or password", true);
  }
  if (!p->activated) throw Error(ErrorCode::NotActivated, "account has not been activated");
  return p->user_id;
}

const Session& Identity::open_session(const std::string& user_id, const std::string& token,
                                      Millis now, Millis ttl) {
  get(user_id);
  auto [it, fresh] = sessions_.insert_or_assign(token, Session{token, user_id, now, now + ttl});
  (void)fresh;
  return it->second;
}

bool Identity::close_session(const std::string& token) { return sessions_.erase(token) > 0; }

bool Identity::session_valid(const std::string& token, Millis now) const {
  auto it = sessions_.find(token);
  return it != sessions_.end() && now < it->second.expires_at;
}

std::string Identity::authenticate(const std::string& token, Millis now) const {
  auto it = sessions_.find(token);
  if (it == sessions_.end() || now >= it->second.expires_at) {
    throw Error(ErrorCode::Unauthorized, "missing, unknown or expired session token");
  }
  return it->second.user_id;
}

std::vector<Session> Identity::sessions_of(const std::string& user_id) const {
  std::vector<Session> out;
  for (const auto& [_, s] : sessions_) {
    if (s.user_id == user_id) out.push_back(s);
  }
  return out;
}

std::size_t Identity::prune_sessions(Millis now) {
  return std::erase_if(sessions_, [now](const auto& kv) { return now >= kv.second.expires_at; });
}

bool Identity::has_expired_sessions(Millis now) const {
  return std::any_of(sessions_.begin(), sessions_.end(), [now](const auto& kv) { return now >= kv.second.expires_at; });
}

std::string Identity::start_recovery(const std::string& username, const std::string& code,
                                     Millis now) {
  const auto* p = find_by_username(username);
  if (!p) throw Error(ErrorCode::UnknownUser, "no such user");
  // Only the newest recovery code is honoured.
  while (auto* old = live_code(p->user_id, CodePurpose::Recovery)) old->consumed = true;
  codes_.push_back(OneTimeCode{code, p->user_id, CodePurpose::Recovery, now + kCodeLifetime, false});
  return p->user_id;
}

void Identity::check_recovery(const std::string& username, const std::string& code,
                              Millis now) const {
  const auto* p = find_by_username(username);
  if (!p) throw Error(ErrorCode::UnknownUser, "no such user");
  check_code(*p, CodePurpose::Recovery, code, now);
}

void Identity::redeem_recovery(const std::string& username, const std::string& code,
                               const std::string& new_digest, Millis now) {
  check_recovery(username, code, now);
  const auto id = find_by_username(username)->user_id;
  live_code(id, CodePurpose::Recovery)->consumed = true;
  mut(id).password_digest = new_digest;
  std::erase_if(sessions_, [&](const auto& kv) { return kv.second.user_id == id; });
}

ProfileChange Identity::update_profile(const std::string& user_id, const std::string& section,
                                       const json& fields) {
  if (!fields.is_object()) throw Error(ErrorCode::BadRequest, "fields must be an object");
  static const std::map<std::string, std::set<std::string>> kSections = {
      {"basic", {"nickname", "gender", "birthday", "avatar", "interests", "status_text"}},
      {"contact", {"email", "phone"}},
      {"location", {"city", "country"}},
  };
  auto sec = kSections.find(section);
  if (sec == kSections.end()) throw Error(ErrorCode::InvalidField, "unknown profile section: " + section);
  for (const auto& [key, _] : fields.items()) {
    if (key == "username" || key == "user_id") throw Error(ErrorCode::ImmutableField, key + " cannot be changed");
    if (!sec->second.contains(key)) throw Error(ErrorCode::InvalidField, key + " is not in section " + section);
  }

  // Validate into a copy so a rejected update changes nothing.
  Profile next = get(user_id);
  auto str = [&](const char* key) {
    const auto& v = fields.at(key);
    if (!v.is_string()) throw Error(ErrorCode::InvalidField, std::string(key) + " must be a string");
    return v.get<std::string>();
  };
  for (const auto& [key, value] : fields.items()) {
    if (key == "nickname") {
      next.nickname = str("nickname");
      if (blank(next.nickname)) throw Error(ErrorCode::MissingField, "nickname cannot be empty");
    } else if (key == "gender") {
      next.gender = gender_from_string(str("gender"));
    } else if (key == "birthday") {
      if (value.is_null()) {
        next.birthday.reset();
      } else {
        check_birthday(str("birthday"));
        next.birthday = str("birthday");
      }
    } else if (key == "avatar") {
      next.avatar = str("avatar");
    } else if (key == "interests") {
      if (!value.is_array()) throw Error(ErrorCode::InvalidField, "interests must be a list");
      next.interests.clear();
      for (const auto& t : value) {
        if (!t.is_string()) throw Error(ErrorCode::InvalidField, "interests must be strings");
        if (auto n = normalize_tag(t.get<std::string>()); !n.empty()) next.interests.insert(n);
      }
    } else if (key == "status_text") {
      next.status_text = str("status_text");
    } else if (key == "email") {
      next.email = str("email");
      check_email(next.email);
    } else if (key == "phone") {
      next.phone = str("phone");
      check_phone(next.phone);
    } else if (key == "city") {
      next.city = str("city");
    } else if (key == "country") {
      next.country = str("country");
    }
  }
  auto& cur = mut(user_id);
  ProfileChange change;
  change.avatar_changed = next.avatar != cur.avatar;
  Profile without_avatar = next;
  without_avatar.avatar = cur.avatar;
  change.other_changed = !(without_avatar == cur);
  cur = std::move(next);
  return change;
}

void Identity::set_admin(const std::string& user_id, bool admin) { mut(user_id).is_admin = admin; }

const Profile* Identity::find(const std::string& user_id) const {
  auto it = users_.find(user_id);
  return it == users_.end() ? nullptr : &it->second;
}

const Profile* Identity::find_by_username(const std::string& username) const {
  auto it = by_name_.find(lower(username));
  return it == by_name_.end() ? nullptr : find(it->second);
}

const Profile& Identity::get(const std::string& user_id) const {
  const auto* p = find(user_id);
  if (!p) throw Error(ErrorCode::UnknownUser, "no such user: " + user_id);
  return *p;
}

Profile& Identity::mut(const std::string& user_id) {
  auto it = users_.find(user_id);
  if (it == users_.end()) throw Error(ErrorCode::UnknownUser, "no such user: " + user_id);
  return it->second;
}

std::vector<const Profile*> Identity::all() const {
  std::vector<const Profile*> out;
  out.reserve(users_.size());
  for (const auto& [_, p] : users_) out.push_back(&p);
  return out;
}

std::vector<OneTimeCode> Identity::codes_of(const std::string& user_id) const {
  std::vector<OneTimeCode> out;
  for (const auto& c : codes_) {
    if (c.user_id == user_id) out.push_back(c);
  }
  return out;
}

json Identity::snapshot() const {
  json users = json::array(), sessions = json::array();
  for (const auto& [_, p] : users_) users.push_back(p);
  for (const auto& [_, s] : sessions_) sessions.push_back(s);
  return json{{"users", users}, {"sessions", sessions}, {"codes", codes_}, {"next_user", next_user_}};
}

void Identity::restore(const json& j) {
  users_.clear();
  by_name_.clear();
  sessions_.clear();
  codes_.clear();
  for (const auto& u : j.at("users")) {
    auto p = u.get<Profile>();
    by_name_[lower(p.username)] = p.user_id;
    users_[p.user_id] = std::move(p);
  }
  for (const auto& s : j.at("sessions")) {
    auto v = s.get<Session>();
    sessions_[v.token] = v;
  }
  codes_ = j.at("codes").get<std::vector<OneTimeCode>>();
  next_user_ = j.at("next_user").get<std::uint64_t>();
}

void to_json(json& j, const Profile& p) {
  j = public_view(p);
  j["password_digest"] = p.password_digest;
}

void from_json(const json& j, Profile& p) {
  p.user_id = j.at("user_id").get<std::string>();
  p.username = j.at("username").get<std::string>();
  p.password_digest = j.value("password_digest", "");
  p.nickname = j.at("nickname").get<std::string>();
  p.email = j.at("email").get<std::string>();
  p.phone = j.at("phone").get<std::string>();
  p.gender = gender_from_string(j.at("gender").get<std::string>());
  if (j.contains("birthday") && !j.at("birthday").is_null()) p.birthday = j.at("birthday").get<std::string>();
  p.avatar = j.value("avatar", "");
  p.interests = j.value("interests", std::set<std::string>{});
  p.status_text = j.value("status_text", "");
  p.city = j.value("city", "");
  p.country = j.value("country", "");
  p.is_admin = j.value("is_admin", false);
  p.activated = j.value("activated", false);
  p.created_at = j.value("created_at", Millis{0});
}

json public_view(const Profile& p) {
  return json{{"user_id", p.user_id},
              {"username", p.username},
              {"nickname", p.nickname},
              {"email", p.email},
              {"phone", p.phone},
              {"gender", std::string(to_string(p.gender))},
              {"birthday", p.birthday ? json(*p.birthday) : json(nullptr)},
              {"avatar", p.avatar},
              {"interests", p.interests},
              {"status_text", p.status_text},
              {"city", p.city},
              {"country", p.country},
              {"is_admin", p.is_admin},
              {"activated", p.activated},
              {"created_at", p.created_at}};
}

void to_json(json& j, const Session& s) {
  j = json{{"token", s.token}, {"user_id", s.user_id}, {"created_at", s.created_at}, {"expires_at", s.expires_at}};
}

void from_json(const json& j, Session& s) {
  s.token = j.at("token").get<std::string>();
  s.user_id = j.at("user_id").get<std::string>();
  s.created_at = j.at("created_at").get<Millis>();
  s.expires_at = j.at("expires_at").get<Millis>();
}

void to_json(json& j, const OneTimeCode& c) {
  j = json{{"code", c.code},
           {"user_id", c.user_id},
           {"purpose", std::string(to_string(c.purpose))},
           {"expires_at", c.expires_at},
           {"consumed", c.consumed}};
}

void from_json(const json& j, OneTimeCode& c) {
  c.code = j.at("code").get<std::string>();
  c.user_id = j.at("user_id").get<std::string>();
  c.purpose = j.at("purpose").get<std::string>() == "activation" ? CodePurpose::Activation : CodePurpose::Recovery;
  c.expires_at = j.at("expires_at").get<Millis>();
  c.consumed = j.at("consumed").get<bool>();
}

}  // namespace lbs::identity
