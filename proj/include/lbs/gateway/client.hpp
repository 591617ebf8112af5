#pragma once

#include <map>
#include <memory>
#include <string>

#include "lbs/error.hpp"
#include "lbs/json.hpp"

namespace httplib {
class Client;
}

namespace lbs::gateway {

/// Server-side failure as seen by a client: the wire code is kept as a
/// string so codes the client does not know still round-trip.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, json body);
  int status() const { return status_; }
  const std::string& code() const { return code_; }
  const json& body() const { return body_; }

 private:
  int status_;
  std::string code_;
  json body_;
};

class ApiClient {
 public:
  using Params = std::map<std::string, std::string>;

  ApiClient(const std::string& host, int port, int read_timeout_seconds = 40);
  ~ApiClient();
  ApiClient(ApiClient&&) noexcept;
  ApiClient& operator=(ApiClient&&) noexcept;

  void set_token(std::string token) { token_ = std::move(token); }
  const std::string& token() const { return token_; }

  /// Each returns the "ok" payload or throws ApiError (server) /
  /// std::runtime_error (transport).
  json get(const std::string& path, const Params& query = {});
  json post(const std::string& path, const json& body = json::object());
  json put(const std::string& path, const json& body = json::object());
  json del(const std::string& path);
  json upload(const std::string& path, const std::string& bytes, const std::string& media);
  std::string download(const std::string& path);

 private:
  std::unique_ptr<httplib::Client> http_;
  std::string token_;
};

}  // namespace lbs::gateway
