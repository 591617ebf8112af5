#include "lbs/gateway/client.hpp"

#include <httplib.h>

#include "lbs/gateway/api.hpp"

namespace lbs::gateway {
namespace {

std::string describe(const json& body) {
  if (body.contains("error")) {
    const auto& e = body.at("error");
    return e.value("code", "?") + ": " + e.value("message", "");
  }
  return body.dump();
}

json unwrap(const httplib::Result& res) {
  if (!res) throw std::runtime_error("cannot reach server: " + httplib::to_string(res.error()));
  json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded()) body = json{{"error", {{"code", "Internal"}, {"message", res->body}}}};
  if (res->status != 200 || !body.contains("ok")) throw ApiError(res->status, body);
  return body.at("ok");
}

}  // namespace

ApiError::ApiError(int status, json body)
    : std::runtime_error(describe(body)), status_(status), body_(std::move(body)) {
  if (body_.contains("error")) code_ = body_.at("error").value("code", "");
}

ApiClient::ApiClient(const std::string& host, int port, int read_timeout_seconds)
    : http_(std::make_unique<httplib::Client>(host, port)) {
  http_->set_read_timeout(read_timeout_seconds, 0);
  http_->set_connection_timeout(5, 0);
}

ApiClient::~ApiClient() = default;
ApiClient::ApiClient(ApiClient&&) noexcept = default;
ApiClient& ApiClient::operator=(ApiClient&&) noexcept = default;

namespace {

httplib::Headers headers_for(const std::string& token) {
  httplib::Headers h;
  if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
  return h;
}

}  // namespace

json ApiClient::get(const std::string& path, const Params& query) {
  httplib::Params params(query.begin(), query.end());
  return unwrap(http_->Get(kApiPrefix + path, params, headers_for(token_)));
}

json ApiClient::post(const std::string& path, const json& body) {
  return unwrap(http_->Post(kApiPrefix + path, headers_for(token_), body.dump(), "application/json"));
}

json ApiClient::put(const std::string& path, const json& body) {
  return unwrap(http_->Put(kApiPrefix + path, headers_for(token_), body.dump(), "application/json"));
}

json ApiClient::del(const std::string& path) {
  return unwrap(http_->Delete(kApiPrefix + path, headers_for(token_)));
}

json ApiClient::upload(const std::string& path, const std::string& bytes, const std::string& media) {
  return unwrap(http_->Post(kApiPrefix + path, headers_for(token_), bytes, media));
}

std::string ApiClient::download(const std::string& path) {
  auto res = http_->Get(kApiPrefix + path, headers_for(token_));
  if (!res) throw std::runtime_error("cannot reach server: " + httplib::to_string(res.error()));
  if (res->status != 200) throw ApiError(res->status, json::parse(res->body, nullptr, false));
  return res->body;
}

}  // namespace lbs::gateway
