#pragma once

#include <map>
#include <string>
#include <vector>

#include "lbs/gateway/platform.hpp"

namespace httplib {
class Server;
}

namespace lbs::gateway {

inline constexpr const char* kApiPrefix = "/api/v1";

/// One documented endpoint. `path` is relative to /api/v1; `{name}`
/// segments are captured into the request args under that name.
struct Route {
  std::string method;
  std::string path;
  std::string op;
};

const std::vector<Route>& routes();

struct HttpRequest {
  std::string method;
  std::string path;  // full path, including /api/v1
  std::multimap<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

json error_body(const Error& e);

/// Routes, authenticates and runs one request. Never throws.
HttpResponse handle(Platform& platform, const HttpRequest& req);

/// Installs `handle` on every method under /api/v1.
void mount(httplib::Server& server, Platform& platform);

}  // namespace lbs::gateway
