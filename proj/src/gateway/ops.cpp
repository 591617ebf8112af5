// Public operations of the platform. Reads run under the shared lock;
// writes become logged commands whose effect lives in an applier.

#include <algorithm>
#include <climits>
#include <regex>

#include "lbs/gateway/platform.hpp"

namespace lbs::gateway {
namespace {

using identity::Profile;

// --- argument helpers ------------------------------------------------------

std::string need(const json& a, const char* key) {
  if (!a.contains(key) || a.at(key).is_null()) throw Error(ErrorCode::MissingField, std::string("missing field: ") + key);
  const auto& v = a.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw Error(ErrorCode::BadRequest, std::string("field must be a string: ") + key);
}

std::string opt(const json& a, const char* key, const std::string& fallback = {}) {
  if (!a.contains(key) || a.at(key).is_null()) return fallback;
  return need(a, key);
}

std::int64_t integer(const json& a, const char* key, std::int64_t fallback) {
  if (!a.contains(key) || a.at(key).is_null()) return fallback;
  const auto& v = a.at(key);
  try {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_string()) {
      std::size_t used = 0;
      const auto s = v.get<std::string>();
      const auto n = std::stoll(s, &used);
      if (used == s.size()) return n;
    }
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::BadRequest, std::string("field must be an integer: ") + key);
}

double number(const json& a, const char* key, double fallback) {
  if (!a.contains(key) || a.at(key).is_null()) return fallback;
  const auto& v = a.at(key);
  try {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      std::size_t used = 0;
      const auto s = v.get<std::string>();
      const auto n = std::stod(s, &used);
      if (used == s.size()) return n;
    }
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::BadRequest, std::string("field must be a number: ") + key);
}

bool boolean(const json& a, const char* key, bool fallback) {
  if (!a.contains(key) || a.at(key).is_null()) return fallback;
  const auto& v = a.at(key);
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
  }
  throw Error(ErrorCode::BadRequest, std::string("field must be a boolean: ") + key);
}

std::size_t limit_of(const json& a, std::size_t fallback, std::size_t max) {
  const auto n = integer(a, "limit", static_cast<std::int64_t>(fallback));
  if (n < 1 || static_cast<std::size_t>(n) > max) {
    throw Error(ErrorCode::BadRequest, "limit must be in [1, " + std::to_string(max) + "]");
  }
  return static_cast<std::size_t>(n);
}

std::vector<std::string> string_list(const json& a, const char* key) {
  std::vector<std::string> out;
  if (!a.contains(key) || a.at(key).is_null()) return out;
  const auto& v = a.at(key);
  if (v.is_array()) {
    for (const auto& x : v) {
      if (!x.is_string()) throw Error(ErrorCode::BadRequest, std::string(key) + " must hold strings");
      out.push_back(x.get<std::string>());
    }
  } else if (v.is_string()) {
    std::stringstream ss(v.get<std::string>());
    for (std::string part; std::getline(ss, part, ',');) {
      if (!part.empty()) out.push_back(part);
    }
  } else {
    throw Error(ErrorCode::BadRequest, std::string(key) + " must be a list");
  }
  return out;
}

/// User ids first, then usernames (ids and usernames cannot collide; see
/// the username rule in register).
const Profile& resolve(const State& s, const std::string& ref) {
  if (const auto* p = s.ids.find(ref)) return *p;
  if (const auto* p = s.ids.find_by_username(ref)) return *p;
  throw Error(ErrorCode::UnknownUser, "no such user: " + ref);
}

json brief(const Profile& p) {
  return json{{"user_id", p.user_id}, {"username", p.username}, {"nickname", p.nickname}, {"avatar", p.avatar}};
}

json groups_json(const State& s, const std::string& user) {
  json out = json::array();
  const auto friends = s.social.friends_of(user);
  for (const auto& g : s.social.groups_of(user)) {
    json members = json::array();
    for (const auto& f : friends) {
      if (f.group_id == g.group_id) members.push_back(f.user_id);
    }
    out.push_back({{"group_id", g.group_id}, {"name", g.name}, {"is_default", g.is_default}, {"members", members}});
  }
  return out;
}

json privacy_json(const State& s, const std::string& user) {
  json out = json::object();
  for (const auto& [f, t] : s.social.privacy_of(user).tiers) out[std::string(to_string(f))] = std::string(to_string(t));
  return out;
}

json event_json(const State& s, const std::string& viewer, const content::FeedEvent& e) {
  json j = e;
  if (const auto* p = s.ids.find(e.actor)) j["actor_profile"] = brief(*p);
  (void)viewer;
  return j;
}

loc::Fix fix_from_args(const json& a, Millis now) {
  if (a.contains("fix")) {
    const auto& f = a.at("fix");
    loc::Fix fix;
    fix.position = geo::GeoPoint::make(number(f, "lat", NAN), number(f, "lon", NAN));
    fix.accuracy = number(f, "accuracy", loc::accuracy_floor(loc::BeaconKind::GpsPseudo));
    if (!(fix.accuracy > 0.0) || !std::isfinite(fix.accuracy)) throw Error(ErrorCode::InvalidMeasurement, "accuracy must be positive");
    fix.method = loc::fix_method_from_string(opt(f, "method", "Trilateration"));
    fix.timestamp = now;
    return fix;
  }
  if (!a.contains("measurements") || !a.at("measurements").is_array()) {
    throw Error(ErrorCode::MissingField, "position needs measurements or fix");
  }
  std::vector<loc::RangeMeasurement> ranges;
  std::vector<loc::TdoaMeasurement> tdoas;
  std::vector<loc::Fix> candidates;
  for (const auto& m : a.at("measurements")) {
    const auto kind = need(m, "kind");
    if (kind == "range") {
      ranges.push_back(m.get<loc::RangeMeasurement>());
    } else if (kind == "tdoa") {
      tdoas.push_back(m.get<loc::TdoaMeasurement>());
    } else if (kind == "proximity") {
      candidates.push_back(loc::proximity_fix(require<loc::Beacon>(m, "beacon"), now));
    } else {
      throw Error(ErrorCode::InvalidMeasurement, "measurement kind must be range, tdoa or proximity");
    }
  }
  std::optional<Error> first_error;
  auto attempt = [&](auto&& solve) {
    try {
      candidates.push_back(solve());
    } catch (const Error& e) {
      if (!first_error) first_error = e;
    }
  };
  if (!ranges.empty()) attempt([&] { return loc::trilaterate(ranges, now); });
  if (!tdoas.empty()) attempt([&] { return loc::multilaterate_tdoa(tdoas, now); });
  if (candidates.empty()) {
    if (first_error) throw *first_error;
    throw Error(ErrorCode::EmptyInput, "no measurements");
  }
  return loc::best_fix(candidates);
}

}  // namespace

struct Ops {
  using ReadFn = std::function<json(Platform&, const State&, const std::string& user, const Request&, Millis now)>;
  using PrepareFn = std::function<json(Platform&, const Request&)>;
  using ApplyFn = std::function<json(const Platform&, State&, const json& cmd, Millis now)>;
  using AfterFn = std::function<void(Platform&, const json& cmd, const json& result)>;

  struct Spec {
    OpInfo info;
    ReadFn read;
    PrepareFn prepare;
    AfterFn after;
  };

  static std::string auth(const State& s, const json& cmd, Millis now) {
    return s.ids.authenticate(cmd.value("token", ""), now);
  }

  static const json& args(const json& cmd) {
    static const json empty = json::object();
    return cmd.contains("args") ? cmd.at("args") : empty;
  }

  static std::map<std::string, Spec>& table();
  static std::map<std::string, ApplyFn>& appliers();

  static void read(const char* module, const char* name, ReadFn fn, bool need_auth = true) {
    table()[name] = Spec{OpInfo{name, module, need_auth, false}, std::move(fn), {}, {}};
  }

  static void write(const char* module, const char* name, ApplyFn apply, PrepareFn prepare = {},
                    AfterFn after = {}, bool need_auth = true) {
    table()[name] = Spec{OpInfo{name, module, need_auth, true}, {}, std::move(prepare), std::move(after)};
    appliers()[name] = std::move(apply);
  }

  static void internal(const char* name, ApplyFn apply) { appliers()[name] = std::move(apply); }

  static const geostore::PresenceRecord& my_record(const State& s, const std::string& user,
                                                   std::optional<geostore::PresenceRecord>& holder) {
    holder = s.geo.get(user);
    if (!holder) throw Error(ErrorCode::NoFixForViewer, "submit a position first");
    return *holder;
  }

  static const GazetteerEntry* home(const Platform& p, const State& s, const std::string& user) {
    if (auto rec = s.geo.get(user)) {
      if (const auto* e = p.gazetteer_.nearest(rec->fix.position, 100'000.0)) return e;
    }
    const auto& prof = s.ids.get(user);
    return p.gazetteer_.find(prof.city, prof.country);
  }

  static void install();
};

std::map<std::string, Ops::Spec>& Ops::table() {
  static std::map<std::string, Spec> t;
  return t;
}

std::map<std::string, Ops::ApplyFn>& Ops::appliers() {
  static std::map<std::string, ApplyFn> t;
  return t;
}

void Ops::install() {
  // --- identity ------------------------------------------------------------
  write(
      "identity", "register",
      [](const Platform&, State& s, const json& cmd, Millis now) {
        const auto& f = cmd.at("form");
        identity::RegisterForm form{f.at("username"), "*", f.at("nickname"), f.at("email"), f.at("phone"),
                                    f.at("gender"), f.at("city"), f.at("country"), f.at("interests")};
        const auto& p = s.ids.register_user(form, cmd.at("digest"), cmd.at("code"), now);
        s.social.init_user(p.user_id);
        return json{{"user_id", p.user_id}, {"username", p.username}, {"activated", false}};
      },
      [](Platform& p, const Request& req) {
        const auto& a = req.args;
        identity::RegisterForm form{opt(a, "username"), opt(a, "password"), opt(a, "nickname"), opt(a, "email"),
                                    opt(a, "phone"),    opt(a, "gender"),   opt(a, "city"),     opt(a, "country"),
                                    string_list(a, "interests")};
        identity::validate(form);
        static const std::regex id_like("u[0-9]+");
        if (std::regex_match(form.username, id_like)) {
          throw Error(ErrorCode::InvalidUsername, "usernames of the form u<digits> are reserved");
        }
        {
          std::shared_lock lock(p.mutex_);
          if (p.state_->ids.find_by_username(form.username)) {
            throw Error(ErrorCode::DuplicateUsername, "username '" + form.username + "' is taken");
          }
        }
        json cmd{{"op", "register"},
                 {"form",
                  {{"username", form.username},
                   {"nickname", form.nickname},
                   {"email", form.email},
                   {"phone", form.phone},
                   {"gender", form.gender},
                   {"city", form.city},
                   {"country", form.country},
                   {"interests", form.interests}}},
                 {"digest", p.hasher_.hash(form.password, p.rng_)},
                 {"code", random_code(p.rng_)}};
        return cmd;
      },
      [](Platform& p, const json& cmd, const json&) {
        p.sms_.send(cmd.at("form").at("phone"),
                    "Your activation code is " + cmd.at("code").get<std::string>() + " (valid 15 minutes)",
                    cmd.at("now"));
      },
      false);

  write(
      "identity", "activate",
      [](const Platform&, State& s, const json& cmd, Millis now) {
        const auto& a = args(cmd);
        s.ids.activate(need(a, "username"), need(a, "code"), now);
        return json{{"username", s.ids.find_by_username(need(a, "username"))->username}, {"activated", true}};
      },
      {}, {}, false);

  write(
      "identity", "login",
      [](const Platform&, State& s, const json& cmd, Millis now) {
        const auto& p = s.ids.get(cmd.at("user_id"));
        if (!p.activated) throw Error(ErrorCode::NotActivated, "account has not been activated");
        const auto& sess = s.ids.open_session(p.user_id, cmd.at("token"), now, cmd.at("ttl"));
        return json{{"token", sess.token}, {"user_id", p.user_id}, {"username", p.username}, {"expires_at", sess.expires_at}};
      },
      [](Platform& p, const Request& req) {
        const auto username = opt(req.args, "username");
        const auto password = opt(req.args, "password");
        std::string digest, user_id;
        bool activated = false;
        {
          std::shared_lock lock(p.mutex_);
          if (const auto* prof = p.state_->ids.find_by_username(username)) {
            digest = prof->password_digest;
            user_id = prof->user_id;
            activated = prof->activated;
          }
        }
        if (user_id.empty() || !PasswordHasher::verify(password, digest)) {
          throw Error(ErrorCode::BadCredentials, "wrong username or password; forgotten your password? use recover", true);
        }
        if (!activated) throw Error(ErrorCode::NotActivated, "account has not been activated");
        return json{{"op", "login"}, {"user_id", user_id}, {"token", random_token(p.rng_)}, {"ttl", p.options_.session_ttl}};
      },
      {}, false);

  write("identity", "logout", [](const Platform&, State& s, const json& cmd, Millis now) {
    auth(s, cmd, now);
    s.ids.close_session(cmd.at("token"));
    return json{{"logged_out", true}};
  });

  write(
      "identity", "recover",
      [](const Platform&, State& s, const json& cmd, Millis now) {
        s.ids.start_recovery(cmd.at("username"), cmd.at("code"), now);
        return json{{"sent", true}};
      },
      [](Platform& p, const Request& req) {
        return json{{"op", "recover"}, {"username", need(req.args, "username")}, {"code", random_code(p.rng_)}};
      },
      [](Platform& p, const json& cmd, const json&) {
        std::string phone;
        {
          std::shared_lock lock(p.mutex_);
          phone = p.state_->ids.find_by_username(cmd.at("username"))->phone;
        }
        p.sms_.send(phone, "Your password recovery code is " + cmd.at("code").get<std::string>() + " (valid 15 minutes)",
                    cmd.at("now"));
      },
      false);

  write(
      "identity", "redeem",
      [](const Platform&, State& s, const json& cmd, Millis now) {
        s.ids.redeem_recovery(cmd.at("username"), cmd.at("code"), cmd.at("digest"), now);
        return json{{"redeemed", true}};
      },
      [](Platform& p, const Request& req) {
        const auto username = need(req.args, "username");
        const auto code = need(req.args, "code");
        const auto password = need(req.args, "new_password");
        if (password.empty()) throw Error(ErrorCode::MissingField, "missing field: new_password");
        {
          std::shared_lock lock(p.mutex_);
          p.state_->ids.check_recovery(username, code, p.clock_.now());
        }
        return json{{"op", "redeem"}, {"username", username}, {"code", code}, {"digest", p.hasher_.hash(password, p.rng_)}};
      },
      {}, false);

  read("identity", "profile_get", [](Platform&, const State& s, const std::string& me, const Request& req, Millis) {
    const auto& owner = resolve(s, opt(req.args, "user", me));
    json view = s.social.filter_profile(me, owner.user_id);
    if (auto rec = s.geo.get(owner.user_id); rec && s.social.can_see(me, owner.user_id, social::FieldGroup::Location)) {
      view["fix"] = rec->fix;
    }
    return view;
  });

  write("identity", "profile_update", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    const auto section = need(a, "section");
    if (section == "privacy") throw Error(ErrorCode::InvalidField, "privacy tiers are set with PUT /privacy");
    if (!a.contains("fields")) throw Error(ErrorCode::MissingField, "missing field: fields");
    const auto& fields = a.at("fields");
    if (fields.is_object() && fields.contains("avatar") && fields.at("avatar").is_string()) {
      const auto avatar = fields.at("avatar").get<std::string>();
      if (!avatar.empty() && !s.msg.has_blob(avatar)) throw Error(ErrorCode::UnknownBlob, "avatar must be an uploaded blob");
    }
    const auto change = s.ids.update_profile(me, section, fields);
    const auto& p = s.ids.get(me);
    if (change.avatar_changed) s.content.append_event(me, content::FeedKind::AvatarChanged, p.avatar, 1, now);
    if (change.other_changed) s.content.append_event(me, content::FeedKind::ProfileUpdated, section, 1, now);
    return identity::public_view(p);
  });

  // --- social: privacy -----------------------------------------------------
  read("social", "privacy_get", [](Platform&, const State& s, const std::string& me, const Request&, Millis) {
    return privacy_json(s, me);
  });

  write("social", "privacy_set", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    s.social.set_privacy(me, a.contains("tiers") ? a.at("tiers") : a);
    return privacy_json(s, me);
  });

  // --- geostore / localization ---------------------------------------------
  write(
      "geostore", "position",
      [](const Platform&, State& s, const json& cmd, Millis now) {
        const auto me = auth(s, cmd, now);
        const auto fix = cmd.at("fix").get<loc::Fix>();
        s.geo.upsert_position(me, fix);
        s.geo.set_online(me, s.msg.online(me, now));
        return json{{"fix", fix}};
      },
      [](Platform& p, const Request& req) {
        return json{{"op", "position"}, {"token", req.token}, {"fix", fix_from_args(req.args, p.clock_.now())}};
      });

  read("social", "nearby", [](Platform&, const State& s, const std::string& me, const Request& req, Millis now) {
    const double radius = number(req.args, "radius", 5000.0);
    json out = json::array();
    for (const auto& n : s.social.visible_nearby(me, radius, boolean(req.args, "friends_only", false), s.geo)) {
      out.push_back({{"user_id", n.user_id},
                     {"profile", n.view},
                     {"fix", n.fix},
                     {"distance", n.distance},
                     {"online", s.msg.online(n.user_id, now)},
                     {"friend", s.social.are_friends(me, n.user_id)}});
    }
    return out;
  });

  read("geostore", "knn", [](Platform&, const State& s, const std::string& me, const Request& req, Millis now) {
    const auto k = integer(req.args, "k", 10);
    if (k < 1 || k > 1000) throw Error(ErrorCode::BadRequest, "k must be in [1, 1000]");
    std::optional<geostore::PresenceRecord> holder;
    const auto& mine = my_record(s, me, holder);
    json out = json::array();
    for (const auto& n : s.geo.query_knn(mine.fix.position, s.geo.size())) {
      if (out.size() >= static_cast<std::size_t>(k)) break;
      const auto& id = n.record.user_id;
      if (id == me || !s.social.can_see(me, id, social::FieldGroup::Location)) continue;
      auto view = s.social.filter_profile(me, id);
      out.push_back({{"user_id", id}, {"profile", view}, {"fix", n.record.fix}, {"distance", n.distance},
                     {"online", s.msg.online(id, now)}});
    }
    return out;
  });

  read("geostore", "poi", [](Platform&, const State& s, const std::string& me, const Request& req, Millis) {
    geo::GeoPoint center;
    if (req.args.contains("lat") || req.args.contains("lon")) {
      center = geo::GeoPoint::make(number(req.args, "lat", NAN), number(req.args, "lon", NAN));
    } else {
      std::optional<geostore::PresenceRecord> holder;
      center = my_record(s, me, holder).fix.position;
    }
    geostore::PoiFilter filter;
    if (auto c = opt(req.args, "category"); !c.empty()) filter.category = geostore::poi_category_from_string(c);
    if (auto n = opt(req.args, "name"); !n.empty()) filter.name_contains = n;
    json out = json::array();
    for (const auto& h : s.geo.search_poi(center, number(req.args, "radius", 1000.0), filter)) {
      out.push_back({{"poi_id", h.poi.poi_id}, {"name", h.poi.name}, {"category", std::string(to_string(h.poi.category))},
                     {"position", h.poi.position}, {"distance", h.distance}});
    }
    return out;
  });

  read("gateway", "geocode", [](Platform& p, const State&, const std::string&, const Request& req, Millis) {
    const auto& e = p.gazetteer_.geocode(need(req.args, "q"));
    return json{{"city", e.city}, {"country", e.country}, {"position", e.centroid}};
  });

  // --- social: graph -------------------------------------------------------
  read("social", "friends_list", [](Platform&, const State& s, const std::string& me, const Request&, Millis now) {
    std::map<std::string, std::string> group_names;
    for (const auto& g : s.social.groups_of(me)) group_names[g.group_id] = g.name;
    json out = json::array();
    auto friends = s.social.friends_of(me);
    std::sort(friends.begin(), friends.end(), [&](const auto& a, const auto& b) {
      return s.ids.get(a.user_id).username < s.ids.get(b.user_id).username;
    });
    for (const auto& f : friends) {
      const auto pres = s.msg.presence(f.user_id, now);
      json j = brief(s.ids.get(f.user_id));
      j["group"] = group_names[f.group_id];
      j["alias"] = f.alias;
      j["online"] = pres.online;
      j["last_seen"] = pres.last_seen ? json(*pres.last_seen) : json(nullptr);
      out.push_back(j);
    }
    return out;
  });

  write("social", "friend_request", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto target = resolve(s, need(args(cmd), "user")).user_id;
    const bool done = s.social.request_friend(me, target);
    if (done) {
      s.hub.push(target, "FriendAccepted", brief(s.ids.get(me)), now);
      s.hub.push(me, "FriendAccepted", brief(s.ids.get(target)), now);
    } else {
      s.hub.push(target, "FriendRequest", brief(s.ids.get(me)), now);
    }
    return json{{"user_id", target}, {"status", done ? "friends" : "requested"}};
  });

  write("social", "friend_remove", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto other = resolve(s, need(args(cmd), "user")).user_id;
    s.social.remove_friend(me, other);
    return json{{"removed", other}};
  });

  write("social", "friend_update", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    const auto other = resolve(s, need(a, "user")).user_id;
    if (!s.social.are_friends(me, other)) throw Error(ErrorCode::NotFriends, "not friends");
    if (a.contains("group")) s.social.move_to_group(me, other, need(a, "group"));
    if (a.contains("alias")) s.social.set_alias(me, other, opt(a, "alias"));
    return groups_json(s, me);
  });

  read("social", "requests_list", [](Platform&, const State& s, const std::string& me, const Request&, Millis) {
    json in = json::array(), out = json::array();
    for (const auto& u : s.social.incoming_requests(me)) in.push_back(brief(s.ids.get(u)));
    for (const auto& u : s.social.outgoing_requests(me)) out.push_back(brief(s.ids.get(u)));
    return json{{"incoming", in}, {"outgoing", out}};
  });

  write("social", "request_accept", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    const auto from = resolve(s, need(a, "user")).user_id;
    std::optional<std::string> group;
    if (a.contains("group")) group = need(a, "group");
    s.social.accept_friend(me, from, group);
    s.hub.push(from, "FriendAccepted", brief(s.ids.get(me)), now);
    return json{{"user_id", from}, {"status", "friends"}};
  });

  write("social", "request_decline", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto from = resolve(s, need(args(cmd), "user")).user_id;
    s.social.decline_friend(me, from);
    return json{{"user_id", from}, {"status", "declined"}};
  });

  read("social", "groups_list", [](Platform&, const State& s, const std::string& me, const Request&, Millis) {
    return groups_json(s, me);
  });

  write("social", "group_manage", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    const auto action = need(a, "action");
    if (action == "create") {
      s.social.create_group(me, need(a, "name"));
    } else if (action == "rename") {
      s.social.rename_group(me, need(a, "name"), need(a, "new_name"));
    } else if (action == "delete") {
      s.social.delete_group(me, need(a, "name"));
    } else {
      throw Error(ErrorCode::InvalidField, "action must be create, rename or delete");
    }
    return groups_json(s, me);
  });

  read("social", "recommend", [](Platform&, const State& s, const std::string& me, const Request& req, Millis) {
    const auto k = integer(req.args, "k", 10);
    if (k < 1 || k > 1000) throw Error(ErrorCode::BadRequest, "k must be in [1, 1000]");
    json out = json::array();
    for (const auto& r : s.social.recommend(me, static_cast<std::size_t>(k), s.geo)) {
      json j = brief(s.ids.get(r.user_id));
      j["score"] = r.score;
      j["shared_interest_count"] = r.shared_interest_count;
      out.push_back(j);
    }
    return out;
  });

  read("social", "users_search", [](Platform&, const State& s, const std::string& me, const Request& req, Millis) {
    json out = json::array();
    for (auto& v : s.social.search(me, opt(req.args, "username"), opt(req.args, "city"), opt(req.args, "interest"))) {
      out.push_back(std::move(v));
    }
    return out;
  });

  // --- messaging -----------------------------------------------------------
  write("messaging", "chat_send", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    const auto to = resolve(s, need(a, "to")).user_id;
    return json(s.msg.send_chat(me, to, opt(a, "body"), opt(a, "blob_id"), now));
  });

  read("messaging", "chat_history", [](Platform&, const State& s, const std::string& me, const Request& req, Millis) {
    const auto peer = resolve(s, need(req.args, "peer")).user_id;
    return json(s.msg.history(me, me, peer, integer(req.args, "before", INT64_MAX), limit_of(req.args, 50, 500)));
  });

  write("messaging", "chat_settings", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    if (!a.contains("history_saving")) throw Error(ErrorCode::MissingField, "missing field: history_saving");
    s.msg.set_history_saving(me, boolean(a, "history_saving", true));
    return json{{"history_saving", s.msg.history_saving(me)}};
  });

  write("messaging", "mail_send", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    const auto to = resolve(s, need(a, "to")).user_id;
    return json(s.msg.send_mail(me, to, opt(a, "subject"), opt(a, "body"), now));
  });

  read("messaging", "mail_list", [](Platform&, const State& s, const std::string& me, const Request& req, Millis) {
    return json{{"mails", s.msg.list_mail(me, opt(req.args, "box", "inbox"))}, {"unread", s.msg.unread_count(me)}};
  });

  write("messaging", "mail_read", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    return json(s.msg.read_mail(me, integer(args(cmd), "id", 0)));
  });

  write("messaging", "mail_delete", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    s.msg.delete_mail(me, integer(args(cmd), "id", 0));
    return json{{"deleted", true}};
  });

  write(
      "messaging", "blob_upload",
      [](const Platform&, State& s, const json& cmd, Millis now) {
        auth(s, cmd, now);
        s.msg.put_blob({cmd.at("blob_id"), cmd.at("size"), cmd.at("media")});
        return json{{"blob_id", cmd.at("blob_id")}, {"size", cmd.at("size")}, {"media", cmd.at("media")}};
      },
      [](Platform& p, const Request& req) {
        {
          std::shared_lock lock(p.mutex_);
          p.state_->ids.authenticate(req.token, p.clock_.now());
        }
        std::string bytes = req.body;
        if (bytes.empty() && req.args.contains("data_b64")) bytes = base64_decode(need(req.args, "data_b64"));
        if (bytes.empty()) throw Error(ErrorCode::MissingField, "upload body is empty");
        auto media = opt(req.args, "media", req.content_type);
        if (media.empty() || media.starts_with("application/json")) media = "application/octet-stream";
        const auto id = p.blobs_->put(bytes);
        return json{{"op", "blob_upload"}, {"token", req.token}, {"blob_id", id}, {"size", bytes.size()}, {"media", media}};
      });

  read("messaging", "blob_fetch", [](Platform&, const State& s, const std::string&, const Request& req, Millis) {
    const auto& info = s.msg.blob(need(req.args, "id"));
    return json{{"blob_id", info.blob_id}, {"media", info.media}};
  });

  write("messaging", "heartbeat", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    s.msg.heartbeat(me, cmd.at("token"), now);
    s.geo.set_online(me, true);
    return json{{"online", true}, {"interval_ms", 20'000}, {"window_ms", messaging::kLivenessWindow}};
  });

  read("messaging", "presence", [](Platform&, const State& s, const std::string&, const Request& req, Millis now) {
    json out = json::array();
    for (const auto& ref : string_list(req.args, "users")) {
      const Profile* p = s.ids.find(ref);
      if (!p) p = s.ids.find_by_username(ref);
      out.push_back(p ? s.msg.presence(p->user_id, now) : messaging::Presence{ref, false, false, std::nullopt});
    }
    return out;
  });

  // --- content -------------------------------------------------------------
  read("content", "feed", [](Platform&, const State& s, const std::string& me, const Request& req, Millis) {
    json out = json::array();
    for (const auto& e : s.content.friend_feed(me, integer(req.args, "before", 0), limit_of(req.args, 20, 200))) {
      out.push_back(event_json(s, me, e));
    }
    return out;
  });

  write("content", "comment_add", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    const auto c = s.content.comment(me, content::target_kind_from_string(need(a, "target_kind")), need(a, "target_id"),
                                     opt(a, "text"), now);
    return json(c);
  });

  read("content", "comments_list", [](Platform&, const State& s, const std::string& me, const Request& req, Millis) {
    return json(s.content.comments(me, content::target_kind_from_string(need(req.args, "target_kind")),
                                   need(req.args, "target_id")));
  });

  write("content", "blog_write", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    const auto id = s.content.blog_write(me, opt(a, "title"), opt(a, "body"), now).post_id;
    if (boolean(a, "publish", false)) s.content.blog_publish(me, id, now);
    return json(s.content.blog_view(me, id));
  });

  write("content", "blog_publish", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    return json(s.content.blog_publish(me, need(args(cmd), "id"), now));
  });

  write("content", "blog_edit", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    std::optional<std::string> title, body;
    if (a.contains("title")) title = need(a, "title");
    if (a.contains("body")) body = need(a, "body");
    return json(s.content.blog_edit(me, need(a, "id"), title, body));
  });

  write("content", "blog_delete", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    s.content.blog_delete(me, need(args(cmd), "id"));
    return json{{"deleted", true}};
  });

  read("content", "blog_view", [](Platform&, const State& s, const std::string& me, const Request& req, Millis) {
    return json(s.content.blog_view(me, need(req.args, "id")));
  });

  read("content", "blog_list", [](Platform&, const State& s, const std::string& me, const Request& req, Millis) {
    return json(s.content.blog_list(me, resolve(s, opt(req.args, "author", me)).user_id));
  });

  write("content", "album_create", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    return json(s.content.album_create(me, opt(args(cmd), "title"), now));
  });

  read("content", "album_list", [](Platform&, const State& s, const std::string& me, const Request& req, Millis) {
    return json(s.content.albums_of(resolve(s, opt(req.args, "owner", me)).user_id));
  });

  read("content", "album_view", [](Platform&, const State& s, const std::string&, const Request& req, Millis) {
    const auto id = need(req.args, "id");
    json j = s.content.album(id);
    j["photo_list"] = s.content.photos_in(id);
    return j;
  });

  write("content", "album_delete", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    s.content.album_delete(me, need(args(cmd), "id"));
    return json{{"deleted", true}};
  });

  write("content", "photo_upload", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    if (!a.contains("photos") || !a.at("photos").is_array()) throw Error(ErrorCode::MissingField, "missing field: photos");
    std::vector<content::PhotoInput> in;
    for (const auto& p : a.at("photos")) in.push_back({need(p, "blob_id"), opt(p, "caption")});
    return json(s.content.photo_upload(me, need(a, "id"), in,
                                       [&](const std::string& b) { return s.msg.has_blob(b); }, now));
  });

  write("content", "photo_edit", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    return json(s.content.photo_edit(me, need(a, "id"), opt(a, "caption")));
  });

  write("content", "photo_delete", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    s.content.photo_delete(me, need(args(cmd), "id"));
    return json{{"deleted", true}};
  });

  write("content", "visit", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto owner = resolve(s, need(args(cmd), "user")).user_id;
    s.content.record_visit(owner, me, now);
    return json{{"recorded", owner != me}};
  });

  read("content", "visitors", [](Platform&, const State& s, const std::string& me, const Request&, Millis) {
    json out = json::array();
    for (const auto& v : s.content.visitors(me)) {
      json j = brief(s.ids.get(v.visitor));
      j["visited_at"] = v.visited_at;
      out.push_back(j);
    }
    return out;
  });

  // --- localinfo -----------------------------------------------------------
  read("localinfo", "weather", [](Platform& p, const State& s, const std::string& me, const Request& req, Millis now) {
    const GazetteerEntry* e = nullptr;
    if (auto q = opt(req.args, "city"); !q.empty()) {
      e = &p.gazetteer_.geocode(q);
    } else {
      e = home(p, s, me);
      if (!e) throw Error(ErrorCode::UnknownCity, "no city known for this user; pass city=\"City, Country\"");
    }
    const auto date = opt(req.args, "date", localinfo::date_of(now));
    return json(p.weather_->forecast(e->city + ", " + e->country, date));
  });

  read("localinfo", "news", [](Platform& p, const State& s, const std::string& me, const Request& req, Millis) {
    const auto city = p.city_of(s, me);
    return json{{"city", city},
                {"items", s.info.news_feed(me, city, integer(req.args, "before", 0), limit_of(req.args, 20, 200))}};
  });

  write("localinfo", "news_subscribe", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    std::set<localinfo::Section> sections;
    for (const auto& name : string_list(args(cmd), "sections")) sections.insert(localinfo::section_from_string(name));
    s.info.subscribe(me, sections);
    json out = json::array();
    for (auto v : sections) out.push_back(std::string(to_string(v)));
    return json{{"sections", out}};
  });

  write(
      "localinfo", "forum_post",
      [](const Platform&, State& s, const json& cmd, Millis now) {
        const auto me = auth(s, cmd, now);
        const auto& a = args(cmd);
        return json(s.info.forum_post(me, cmd.at("city"), opt(a, "title"), opt(a, "body"), now));
      },
      [](Platform& p, const Request& req) {
        std::string city;
        {
          std::shared_lock lock(p.mutex_);
          city = p.city_of(*p.state_, p.state_->ids.authenticate(req.token, p.clock_.now()));
        }
        return json{{"op", "forum_post"}, {"token", req.token}, {"args", req.args}, {"city", city}};
      });

  read("localinfo", "forum_list", [](Platform& p, const State& s, const std::string& me, const Request&, Millis) {
    return json(s.info.forum_list(me, p.city_of(s, me)));
  });

  read("localinfo", "forum_queue", [](Platform&, const State& s, const std::string& me, const Request&, Millis) {
    return json(s.info.moderation_queue(me));
  });

  read("localinfo", "forum_get", [](Platform&, const State& s, const std::string& me, const Request& req, Millis) {
    return json(s.info.forum_get(me, integer(req.args, "id", 0)));
  });

  write("localinfo", "forum_moderate", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    const auto decision = need(a, "decision");
    if (decision != "approve" && decision != "reject") throw Error(ErrorCode::InvalidField, "decision must be approve or reject");
    return json(s.info.moderate(me, integer(a, "id", 0), decision == "approve"));
  });

  write("localinfo", "forum_reply", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto& a = args(cmd);
    const auto r = s.info.reply(me, integer(a, "id", 0), opt(a, "body"), now);
    return json{{"reply_id", r.reply_id}, {"author", r.author}, {"body", r.body}, {"at", r.at}};
  });

  // --- gateway -------------------------------------------------------------
  read("gateway", "tiles", [](Platform&, const State&, const std::string&, const Request&, Millis) { return json(); });
  read("gateway", "events", [](Platform&, const State&, const std::string&, const Request&, Millis) { return json(); });

  // --- internal commands ---------------------------------------------------
  internal("events_sync", [](const Platform&, State& s, const json& cmd, Millis now) {
    const auto me = auth(s, cmd, now);
    const auto flushed = s.msg.flush_pending(me, now);
    const auto acked = s.hub.ack(me, cmd.at("since"));
    return json{{"flushed", flushed}, {"acked", acked}};
  });

  internal("presence_sweep", [](const Platform&, State& s, const json&, Millis now) {
    const auto gone = s.msg.sweep(now);
    for (const auto& u : gone) s.geo.set_online(u, false);
    const auto pruned = s.ids.prune_sessions(now);
    return json{{"offline", gone}, {"pruned_sessions", pruned}};
  });

  internal("set_admin", [](const Platform&, State& s, const json& cmd, Millis) {
    const auto* p = s.ids.find_by_username(cmd.at("username"));
    if (!p) throw Error(ErrorCode::UnknownUser, "no such user");
    s.ids.set_admin(p->user_id, cmd.at("admin"));
    return json{{"user_id", p->user_id}, {"is_admin", cmd.at("admin")}};
  });
}

namespace {

void ensure_installed() {
  static std::once_flag once;
  std::call_once(once, Ops::install);
}

}  // namespace

const std::vector<OpInfo>& Platform::operations() {
  ensure_installed();
  static const std::vector<OpInfo> ops = [] {
    std::vector<OpInfo> out;
    for (const auto& [_, spec] : Ops::table()) out.push_back(spec.info);
    return out;
  }();
  return ops;
}

json Platform::apply(State& s, const json& cmd) const {
  ensure_installed();
  const auto op = cmd.at("op").get<std::string>();
  auto it = Ops::appliers().find(op);
  if (it == Ops::appliers().end()) throw Error(ErrorCode::CorruptLog, "unknown command " + op);
  return it->second(*this, s, cmd, cmd.at("now").get<Millis>());
}

Reply Platform::call(const std::string& op, const Request& req) {
  ensure_installed();
  auto it = Ops::table().find(op);
  if (it == Ops::table().end()) throw Error(ErrorCode::NotFound, "unknown operation " + op);
  const auto& spec = it->second;
  if (spec.info.auth && req.token.empty()) throw Error(ErrorCode::Unauthorized, "missing session token");
  if (stopping_ && op == "events") throw Error(ErrorCode::Unauthorized, "server is shutting down");

  if (op == "events") return events(req);
  if (op == "tiles") {
    {
      std::shared_lock lock(mutex_);
      state_->ids.authenticate(req.token, clock_.now());
    }
    TileRef t{need(req.args, "layer"), static_cast<int>(std::clamp<std::int64_t>(integer(req.args, "z", 0), -1, 99)),
              integer(req.args, "x", 0), integer(req.args, "y", 0)};
    auto img = tiles_->get(t);
    return Reply{json{{"layer", t.layer}, {"z", t.z}, {"x", t.x}, {"y", t.y}}, std::move(img.bytes), img.content_type};
  }
  if (op == "blob_fetch") {
    json meta;
    {
      std::shared_lock lock(mutex_);
      const auto me = state_->ids.authenticate(req.token, clock_.now());
      meta = spec.read(*this, *state_, me, req, clock_.now());
    }
    auto bytes = blobs_->get(meta.at("blob_id"));
    if (!bytes) throw Error(ErrorCode::UnknownBlob, "blob bytes are missing");
    return Reply{meta, std::move(*bytes), meta.at("media")};
  }

  if (!spec.info.mutating) {
    std::shared_lock lock(mutex_);
    const auto now = clock_.now();
    const auto me = spec.info.auth ? state_->ids.authenticate(req.token, now) : std::string();
    return Reply{spec.read(*this, *state_, me, req, now), std::nullopt, {}};
  }

  if (spec.info.auth && spec.prepare) {
    // Custom preparation may inspect arguments; a bad token wins over bad input.
    std::shared_lock lock(mutex_);
    state_->ids.authenticate(req.token, clock_.now());
  }
  json cmd = spec.prepare ? spec.prepare(*this, req) : json{{"op", op}, {"token", req.token}, {"args", req.args}};
  cmd["op"] = op;
  json result = commit(cmd);
  if (spec.after) {
    cmd["now"] = last_now_;
    spec.after(*this, cmd, result);
  }
  return Reply{std::move(result), std::nullopt, {}};
}

}  // namespace lbs::gateway
