#include "lbs/gateway/api.hpp"

#include <httplib.h>

#include <algorithm>
#include <sstream>

namespace lbs::gateway {
namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '/');) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

bool match(const Route& r, const std::vector<std::string>& parts, json& args) {
  const auto pattern = split_path(r.path);
  if (pattern.size() != parts.size()) return false;
  json captured = json::object();
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = pattern[i];
    if (p.size() > 2 && p.front() == '{' && p.back() == '}') {
      captured[p.substr(1, p.size() - 2)] = httplib::detail::decode_url(parts[i], false);
    } else if (p != parts[i]) {
      return false;
    }
  }
  for (auto& [k, v] : captured.items()) args[k] = v;
  return true;
}

std::string bearer(const HttpRequest& req) {
  auto it = req.headers.find("authorization");
  if (it == req.headers.end()) return {};
  const std::string prefix = "Bearer ";
  if (it->second.size() > prefix.size() && it->second.compare(0, prefix.size(), prefix) == 0) {
    return it->second.substr(prefix.size());
  }
  return {};
}

HttpResponse error_response(const Error& e) {
  return HttpResponse{http_status(e.code()), json{{"error", error_body(e)}}.dump(), "application/json"};
}

}  // namespace

const std::vector<Route>& routes() {
  // Literal segments are listed before captures that could shadow them.
  static const std::vector<Route> table = {
      {"POST", "/register", "register"},
      {"POST", "/activate", "activate"},
      {"POST", "/login", "login"},
      {"POST", "/logout", "logout"},
      {"POST", "/recover", "recover"},
      {"POST", "/redeem", "redeem"},
      {"GET", "/profile", "profile_get"},
      {"PUT", "/profile", "profile_update"},
      {"GET", "/privacy", "privacy_get"},
      {"PUT", "/privacy", "privacy_set"},
      {"POST", "/position", "position"},
      {"GET", "/nearby", "nearby"},
      {"GET", "/knn", "knn"},
      {"GET", "/poi", "poi"},
      {"GET", "/geocode", "geocode"},
      {"GET", "/friends", "friends_list"},
      {"POST", "/friends", "friend_request"},
      {"PUT", "/friends/{user}", "friend_update"},
      {"DELETE", "/friends/{user}", "friend_remove"},
      {"GET", "/requests", "requests_list"},
      {"POST", "/requests/{user}/accept", "request_accept"},
      {"POST", "/requests/{user}/decline", "request_decline"},
      {"GET", "/groups", "groups_list"},
      {"POST", "/groups", "group_manage"},
      {"GET", "/recommend", "recommend"},
      {"GET", "/users", "users_search"},
      {"POST", "/chat", "chat_send"},
      {"GET", "/chat/history", "chat_history"},
      {"PUT", "/chat/settings", "chat_settings"},
      {"POST", "/mail", "mail_send"},
      {"GET", "/mail", "mail_list"},
      {"GET", "/mail/{id}", "mail_read"},
      {"DELETE", "/mail/{id}", "mail_delete"},
      {"POST", "/blob", "blob_upload"},
      {"GET", "/blob/{id}", "blob_fetch"},
      {"POST", "/heartbeat", "heartbeat"},
      {"GET", "/presence", "presence"},
      {"GET", "/feed", "feed"},
      {"POST", "/comment", "comment_add"},
      {"GET", "/comment", "comments_list"},
      {"POST", "/blog", "blog_write"},
      {"GET", "/blog", "blog_list"},
      {"GET", "/blog/{id}", "blog_view"},
      {"PUT", "/blog/{id}", "blog_edit"},
      {"DELETE", "/blog/{id}", "blog_delete"},
      {"POST", "/blog/{id}/publish", "blog_publish"},
      {"POST", "/album", "album_create"},
      {"GET", "/album", "album_list"},
      {"GET", "/album/{id}", "album_view"},
      {"DELETE", "/album/{id}", "album_delete"},
      {"POST", "/album/{id}/photos", "photo_upload"},
      {"PUT", "/photo/{id}", "photo_edit"},
      {"DELETE", "/photo/{id}", "photo_delete"},
      {"POST", "/visitors/{user}", "visit"},
      {"GET", "/visitors", "visitors"},
      {"GET", "/weather", "weather"},
      {"GET", "/news", "news"},
      {"POST", "/news/subscribe", "news_subscribe"},
      {"POST", "/forum", "forum_post"},
      {"GET", "/forum", "forum_list"},
      {"GET", "/forum/queue", "forum_queue"},
      {"GET", "/forum/{id}", "forum_get"},
      {"POST", "/forum/{id}/moderate", "forum_moderate"},
      {"POST", "/forum/{id}/reply", "forum_reply"},
      {"GET", "/tiles/{layer}/{z}/{x}/{y}", "tiles"},
      {"GET", "/events", "events"},
  };
  return table;
}

json error_body(const Error& e) {
  json j{{"code", std::string(to_string(e.code()))}, {"message", e.what()}};
  if (e.recovery_hint()) j["recovery_hint"] = std::string("POST ") + kApiPrefix + "/recover";
  return j;
}

HttpResponse handle(Platform& platform, const HttpRequest& req) {
  try {
    const std::string prefix = kApiPrefix;
    if (req.path.compare(0, prefix.size(), prefix) != 0) throw Error(ErrorCode::NotFound, "no route " + req.path);
    const auto parts = split_path(req.path.substr(prefix.size()));

    Request call;
    call.token = bearer(req);
    const Route* route = nullptr;
    bool path_known = false;
    for (const auto& r : routes()) {
      json captured = json::object();
      if (!match(r, parts, captured)) continue;
      path_known = true;
      if (r.method != req.method) continue;
      route = &r;
      call.args = captured;
      break;
    }
    if (!route) {
      throw Error(ErrorCode::NotFound, (path_known ? "method not allowed on " : "no route ") + req.path);
    }

    for (const auto& [k, v] : req.query) {
      if (!call.args.contains(k)) call.args[k] = v;
    }
    auto ct = req.headers.find("content-type");
    call.content_type = ct == req.headers.end() ? "" : ct->second;
    const bool is_json = call.content_type.starts_with("application/json") ||
                         (call.content_type.empty() && !req.body.empty() && req.body.front() == '{');
    if (!req.body.empty() && is_json) {
      json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) throw Error(ErrorCode::BadRequest, "body must be a JSON object");
      for (auto& [k, v] : body.items()) {
        if (!call.args.contains(k)) call.args[k] = v;
      }
    } else {
      call.body = req.body;
    }

    auto reply = platform.call(route->op, call);
    if (reply.bytes) return HttpResponse{200, std::move(*reply.bytes), reply.content_type};
    return HttpResponse{200, json{{"ok", reply.ok}}.dump(), "application/json"};
  } catch (const Error& e) {
    return error_response(e);
  } catch (const json::exception& e) {
    return error_response(Error(ErrorCode::BadRequest, e.what()));
  } catch (const std::exception& e) {
    return HttpResponse{500, json{{"error", {{"code", "Internal"}, {"message", e.what()}}}}.dump(), "application/json"};
  }
}

void mount(httplib::Server& server, Platform& platform) {
  auto handler = [&platform](const httplib::Request& in, httplib::Response& out) {
    HttpRequest req;
    req.method = in.method;
    req.path = in.path;
    for (const auto& [k, v] : in.params) req.query.emplace(k, v);
    for (const auto& [k, v] : in.headers) {
      std::string name = k;
      std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
      req.headers[name] = v;
    }
    req.body = in.body;
    auto res = handle(platform, req);
    out.status = res.status;
    out.set_content(std::move(res.body), res.content_type);
  };
  const std::string pattern = std::string(kApiPrefix) + "/.*";
  server.Get(pattern, handler);
  server.Post(pattern, handler);
  server.Put(pattern, handler);
  server.Delete(pattern, handler);
}

}  // namespace lbs::gateway
