// lbsd: server, offline admin tasks, scripting client and demo seeding.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "lbs/gateway/api.hpp"
#include "lbs/gateway/client.hpp"
#include "lbs/gateway/config.hpp"
#include "lbs/gateway/platform.hpp"

// httplib pulls in <resolv.h>, whose _res macro breaks Eigen; keep it last.
#include <CLI11.hpp>
#include <httplib.h>

using namespace lbs;
using namespace lbs::gateway;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

// --- serve -----------------------------------------------------------------

int serve(const std::string& config_path) {
  const auto cfg = load_config(config_path);
  std::filesystem::create_directories(cfg.data_dir);
  SystemClock clock;
  SystemRandom rng;
  OutboxSms sms(cfg.data_dir / "outbox");
  Platform platform(PlatformOptions::from(cfg), clock, rng, sms);
  if (const auto& w = platform.recovery().warning) std::cerr << "warning: " << *w << std::endl;

  httplib::Server server;
  server.new_task_queue = [] { return new httplib::ThreadPool(64); };
  mount(server, platform);

  int port = cfg.port();
  if (port == 0) {
    port = server.bind_to_any_port(cfg.host());
  } else if (!server.bind_to_port(cfg.host(), port)) {
    port = -1;
  }
  if (port < 0) {
    std::cerr << "error: cannot listen on " << cfg.listen_addr << std::endl;
    return 1;
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  std::thread housekeeping([&] {
    auto next_sweep = std::chrono::steady_clock::now();
    while (!g_stop) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
      if (std::chrono::steady_clock::now() >= next_sweep) {
        try {
          platform.sweep();
        } catch (const std::exception& e) {
          std::cerr << "sweep failed: " << e.what() << std::endl;
        }
        next_sweep += std::chrono::seconds(5);
      }
    }
    platform.shutdown();
    server.stop();
  });

  std::cout << "listening on " << cfg.host() << ":" << port << std::endl;
  server.listen_after_bind();
  g_stop = true;
  housekeeping.join();
  platform.checkpoint();
  return 0;
}

// --- admin -------------------------------------------------------------------

int create_admin(const std::string& config_path, const std::string& username) {
  const auto cfg = load_config(config_path);
  SystemClock clock;
  SystemRandom rng;
  OutboxSms sms(cfg.data_dir / "outbox");
  Platform platform(PlatformOptions::from(cfg), clock, rng, sms);
  platform.grant_admin(username);
  platform.checkpoint();
  std::cout << username << " is now an administrator" << std::endl;
  return 0;
}

// --- demo ----------------------------------------------------------------------

constexpr const char* kDemoPassword = "demo-pass-123";

int demo(const std::string& config_path) {
  const auto cfg = load_config(config_path);
  SystemClock clock;
  SystemRandom rng;
  MemorySms sms;
  Platform platform(PlatformOptions::from(cfg), clock, rng, sms);

  struct Seed {
    const char* username;
    const char* nickname;
    const char* phone;
    std::vector<std::string> interests;
    double lat, lon;
  };
  // Around Xinghai Square in Dalian.
  const std::vector<Seed> seeds = {
      {"bob", "Bob", "13800000001", {"hiking", "photography", "music"}, 38.8770, 121.5880},
      {"carol", "Carol", "13800000002", {"music", "chess"}, 38.8810, 121.5950},
  };
  std::map<std::string, std::string> tokens;
  for (const auto& s : seeds) {
    const bool exists = platform.inspect([&](const State& st) { return st.ids.find_by_username(s.username) != nullptr; });
    if (!exists) {
      Request reg;
      reg.args = {{"username", s.username}, {"password", kDemoPassword}, {"nickname", s.nickname},
                  {"email", std::string(s.username) + "@example.org"}, {"phone", s.phone}, {"gender", "Unspecified"},
                  {"city", "Dalian"}, {"country", "China"}, {"interests", s.interests}};
      platform.call("register", reg);
      platform.call("activate", Request{{}, {{"username", s.username}, {"code", *sms.last_code(s.phone)}}});
    }
    const auto login = platform.call("login", Request{{}, {{"username", s.username}, {"password", kDemoPassword}}});
    const auto token = login.ok.at("token").get<std::string>();
    tokens[s.username] = token;
    platform.call("position", Request{token, {{"fix", {{"lat", s.lat}, {"lon", s.lon}, {"accuracy", 10.0}}}}});
    platform.call("privacy_set", Request{token, {{"location", "Everyone"}}});
  }
  const bool friends = platform.inspect([&](const State& st) {
    const auto* b = st.ids.find_by_username("bob");
    const auto* c = st.ids.find_by_username("carol");
    return st.social.are_friends(b->user_id, c->user_id);
  });
  if (!friends) {
    platform.call("friend_request", Request{tokens["bob"], {{"user", "carol"}}});
    platform.call("request_accept", Request{tokens["carol"], {{"user", "bob"}}});
    platform.call("blog_write", Request{tokens["bob"],
                                        {{"title", "Evening at Xinghai Square"},
                                         {"body", "Kites everywhere, the sea wind is strong today."},
                                         {"publish", true}}});
  }
  for (const auto& [_, token] : tokens) platform.call("logout", Request{token});
  platform.checkpoint();
  print(json{{"seeded", {"bob", "carol"}}, {"password", kDemoPassword}, {"data_dir", cfg.data_dir.string()}});
  return 0;
}

// --- client --------------------------------------------------------------------

struct ClientCtx {
  std::string server = "127.0.0.1:8080";
  std::string session_file;

  std::string session_path() const {
    if (!session_file.empty()) return session_file;
    const char* home = std::getenv("HOME");
    return std::string(home ? home : ".") + "/.lbsd-session";
  }

  std::string load_token() const {
    std::ifstream in(session_path());
    std::string token;
    std::getline(in, token);
    return token;
  }

  void save_token(const std::string& token) const {
    std::ofstream out(session_path(), std::ios::trunc);
    out << token << '\n';
  }

  ApiClient connect(bool with_token = true) const {
    const auto colon = server.rfind(':');
    if (colon == std::string::npos) throw std::runtime_error("--server must be host:port");
    ApiClient c(server.substr(0, colon), std::stoi(server.substr(colon + 1)));
    if (with_token) c.set_token(load_token());
    return c;
  }
};

json parse_json_arg(const std::string& text) {
  std::string body = text;
  if (!body.empty() && body.front() == '@') {
    std::ifstream in(body.substr(1));
    if (!in) throw std::runtime_error("cannot read " + body.substr(1));
    body.assign(std::istreambuf_iterator<char>(in), {});
  }
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("not valid JSON: " + text);
  return j;
}

void add_client(CLI::App& app, ClientCtx& ctx, std::function<void()>& action) {
  auto* client = app.add_subcommand("client", "Issue API calls against a running server");
  client->add_option("--server", ctx.server, "host:port of the server")->envname("LBSD_SERVER");
  client->add_option("--session", ctx.session_file, "File holding the session token")->envname("LBSD_SESSION");
  client->require_subcommand(1);

  // register
  {
    auto* cmd = client->add_subcommand("register", "Create an account; the activation code goes out by SMS");
    auto form = std::make_shared<identity::RegisterForm>();
    form->gender = "Unspecified";
    auto interests = std::make_shared<std::string>();
    cmd->add_option("username", form->username)->required();
    cmd->add_option("--password", form->password)->required();
    cmd->add_option("--nickname", form->nickname);
    cmd->add_option("--email", form->email)->required();
    cmd->add_option("--phone", form->phone)->required();
    cmd->add_option("--gender", form->gender);
    cmd->add_option("--city", form->city);
    cmd->add_option("--country", form->country);
    cmd->add_option("--interests", *interests, "Comma-separated tags");
    cmd->callback([&, form, interests] {
      action = [&, form, interests] {
        auto c = ctx.connect(false);
        print(c.post("/register", {{"username", form->username}, {"password", form->password},
                                   {"nickname", form->nickname.empty() ? form->username : form->nickname},
                                   {"email", form->email}, {"phone", form->phone}, {"gender", form->gender},
                                   {"city", form->city}, {"country", form->country}, {"interests", *interests}}));
      };
    });
  }
  // activate
  {
    auto* cmd = client->add_subcommand("activate", "Redeem the activation code");
    auto user = std::make_shared<std::string>(), code = std::make_shared<std::string>();
    cmd->add_option("username", *user)->required();
    cmd->add_option("code", *code)->required();
    cmd->callback([&, user, code] {
      action = [&, user, code] { print(ctx.connect(false).post("/activate", {{"username", *user}, {"code", *code}})); };
    });
  }
  // login
  {
    auto* cmd = client->add_subcommand("login", "Open a session and store its token");
    auto user = std::make_shared<std::string>(), pass = std::make_shared<std::string>();
    auto quiet = std::make_shared<bool>(false);
    cmd->add_option("username", *user)->required();
    cmd->add_option("password", *pass)->required();
    cmd->add_flag("--no-heartbeat", *quiet, "Do not announce presence");
    cmd->callback([&, user, pass, quiet] {
      action = [&, user, pass, quiet] {
        auto c = ctx.connect(false);
        auto res = c.post("/login", {{"username", *user}, {"password", *pass}});
        ctx.save_token(res.at("token"));
        c.set_token(res.at("token"));
        if (!*quiet) c.post("/heartbeat");
        print(res);
      };
    });
  }
  client->add_subcommand("logout", "Close the stored session")->callback([&] {
    action = [&] { print(ctx.connect().post("/logout")); };
  });
  client->add_subcommand("heartbeat", "Refresh presence")->callback([&] {
    action = [&] { print(ctx.connect().post("/heartbeat")); };
  });
  // recover / redeem
  {
    auto* cmd = client->add_subcommand("recover", "Send a password recovery code");
    auto user = std::make_shared<std::string>();
    cmd->add_option("username", *user)->required();
    cmd->callback([&, user] { action = [&, user] { print(ctx.connect(false).post("/recover", {{"username", *user}})); }; });

    auto* redeem = client->add_subcommand("redeem", "Set a new password with a recovery code");
    auto code = std::make_shared<std::string>(), pass = std::make_shared<std::string>();
    redeem->add_option("username", *user)->required();
    redeem->add_option("code", *code)->required();
    redeem->add_option("new_password", *pass)->required();
    redeem->callback([&, user, code, pass] {
      action = [&, user, code, pass] {
        print(ctx.connect(false).post("/redeem", {{"username", *user}, {"code", *code}, {"new_password", *pass}}));
      };
    });
  }
  // geocode
  {
    auto* cmd = client->add_subcommand("geocode", "Look up \"City, Country\"");
    auto q = std::make_shared<std::string>();
    cmd->add_option("query", *q)->required();
    cmd->callback([&, q] { action = [&, q] { print(ctx.connect().get("/geocode", {{"q", *q}})); }; });
  }
  // locate
  {
    auto* cmd = client->add_subcommand("locate", "Submit a position: a GPS fix or beacon measurements");
    auto lat = std::make_shared<std::optional<double>>(), lon = std::make_shared<std::optional<double>>();
    auto acc = std::make_shared<double>(10.0);
    auto meas = std::make_shared<std::string>();
    cmd->add_option("--lat", *lat);
    cmd->add_option("--lon", *lon);
    cmd->add_option("--accuracy", *acc);
    cmd->add_option("--measurements", *meas, "JSON array, or @file");
    cmd->callback([&, lat, lon, acc, meas] {
      action = [&, lat, lon, acc, meas] {
        json body;
        if (!meas->empty()) {
          body["measurements"] = parse_json_arg(*meas);
        } else if (*lat && *lon) {
          body["fix"] = {{"lat", **lat}, {"lon", **lon}, {"accuracy", *acc}};
        } else {
          throw std::runtime_error("give --lat/--lon or --measurements");
        }
        print(ctx.connect().post("/position", body));
      };
    });
  }
  // nearby
  {
    auto* cmd = client->add_subcommand("nearby", "Users near your last fix");
    auto radius = std::make_shared<double>(5000.0);
    auto friends_only = std::make_shared<bool>(false);
    cmd->add_option("--radius", *radius, "Metres");
    cmd->add_flag("--friends-only", *friends_only);
    cmd->callback([&, radius, friends_only] {
      action = [&, radius, friends_only] {
        print(ctx.connect().get("/nearby", {{"radius", json(*radius).dump()}, {"friends_only", *friends_only ? "true" : "false"}}));
      };
    });
  }
  // recommend
  {
    auto* cmd = client->add_subcommand("recommend", "Friend suggestions");
    auto k = std::make_shared<int>(10);
    cmd->add_option("--k", *k);
    cmd->callback([&, k] { action = [&, k] { print(ctx.connect().get("/recommend", {{"k", std::to_string(*k)}})); }; });
  }
  // friends
  {
    auto* cmd = client->add_subcommand("friends", "Friend list and requests");
    cmd->require_subcommand(1);
    cmd->add_subcommand("list", "Friends with online flags")->callback([&] {
      action = [&] { print(ctx.connect().get("/friends")); };
    });
    cmd->add_subcommand("requests", "Pending requests")->callback([&] {
      action = [&] { print(ctx.connect().get("/requests")); };
    });
    auto user = std::make_shared<std::string>();
    auto* add = cmd->add_subcommand("add", "Send a friend request");
    add->add_option("user", *user)->required();
    add->callback([&, user] { action = [&, user] { print(ctx.connect().post("/friends", {{"user", *user}})); }; });
    auto* accept = cmd->add_subcommand("accept", "Accept a request");
    accept->add_option("user", *user)->required();
    accept->callback([&, user] { action = [&, user] { print(ctx.connect().post("/requests/" + *user + "/accept")); }; });
    auto* remove = cmd->add_subcommand("remove", "Remove a friend");
    remove->add_option("user", *user)->required();
    remove->callback([&, user] { action = [&, user] { print(ctx.connect().del("/friends/" + *user)); }; });
  }
  // chat
  {
    auto* cmd = client->add_subcommand("chat", "Instant messages");
    cmd->require_subcommand(1);
    auto peer = std::make_shared<std::string>(), body = std::make_shared<std::string>();
    auto* send = cmd->add_subcommand("send", "Send a message");
    send->add_option("to", *peer)->required();
    send->add_option("body", *body)->required();
    send->callback([&, peer, body] {
      action = [&, peer, body] { print(ctx.connect().post("/chat", {{"to", *peer}, {"body", *body}})); };
    });
    auto* history = cmd->add_subcommand("history", "Saved conversation");
    history->add_option("peer", *peer)->required();
    history->callback([&, peer] {
      action = [&, peer] { print(ctx.connect().get("/chat/history", {{"peer", *peer}})); };
    });
    auto since = std::make_shared<std::int64_t>(0);
    auto timeout = std::make_shared<int>(25);
    auto* poll = cmd->add_subcommand("poll", "Wait for events after a sequence number");
    poll->add_option("--since", *since);
    poll->add_option("--timeout", *timeout, "Seconds");
    poll->callback([&, since, timeout] {
      action = [&, since, timeout] {
        print(ctx.connect().get("/events", {{"since", std::to_string(*since)}, {"timeout", std::to_string(*timeout)}}));
      };
    });
    auto saving = std::make_shared<std::string>();
    auto* settings = cmd->add_subcommand("saving", "Turn history saving on or off");
    settings->add_option("state", *saving)->required()->check(CLI::IsMember({"on", "off"}));
    settings->callback([&, saving] {
      action = [&, saving] { print(ctx.connect().put("/chat/settings", {{"history_saving", *saving == "on"}})); };
    });
  }
  // mail
  {
    auto* cmd = client->add_subcommand("mail", "Internal mail");
    cmd->require_subcommand(1);
    auto to = std::make_shared<std::string>(), subject = std::make_shared<std::string>(),
         body = std::make_shared<std::string>();
    auto* send = cmd->add_subcommand("send", "Send a letter");
    send->add_option("to", *to)->required();
    send->add_option("subject", *subject)->required();
    send->add_option("body", *body)->required();
    send->callback([&, to, subject, body] {
      action = [&, to, subject, body] {
        print(ctx.connect().post("/mail", {{"to", *to}, {"subject", *subject}, {"body", *body}}));
      };
    });
    auto box = std::make_shared<std::string>("inbox");
    auto* list = cmd->add_subcommand("list", "List a mailbox");
    list->add_option("--box", *box)->check(CLI::IsMember({"inbox", "sent"}));
    list->callback([&, box] { action = [&, box] { print(ctx.connect().get("/mail", {{"box", *box}})); }; });
    auto id = std::make_shared<std::int64_t>(0);
    auto* read = cmd->add_subcommand("read", "Open a letter");
    read->add_option("id", *id)->required();
    read->callback([&, id] { action = [&, id] { print(ctx.connect().get("/mail/" + std::to_string(*id))); }; });
  }
  // generic call
  {
    auto* cmd = client->add_subcommand("call", "Raw API call, e.g. call GET /weather");
    auto method = std::make_shared<std::string>(), path = std::make_shared<std::string>(),
         body = std::make_shared<std::string>();
    cmd->add_option("method", *method)->required()->check(CLI::IsMember({"GET", "POST", "PUT", "DELETE"}));
    cmd->add_option("path", *path, "Path below /api/v1, query string allowed")->required();
    cmd->add_option("body", *body, "JSON body, or @file");
    cmd->callback([&, method, path, body] {
      action = [&, method, path, body] {
        auto c = ctx.connect();
        const json payload = body->empty() ? json::object() : parse_json_arg(*body);
        if (*method == "GET") {
          ApiClient::Params params;
          auto p = *path;
          if (auto q = p.find('?'); q != std::string::npos) {
            httplib::Params parsed;
            httplib::detail::parse_query_text(p.substr(q + 1), parsed);
            params.insert(parsed.begin(), parsed.end());
            p = p.substr(0, q);
          }
          print(c.get(p, params));
        } else if (*method == "POST") {
          print(c.post(*path, payload));
        } else if (*method == "PUT") {
          print(c.put(*path, payload));
        } else {
          print(c.del(*path));
        }
      };
    });
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Location-based social platform server and client"};
  app.require_subcommand(1);
  std::function<void()> action;

  std::string config_path = "lbsd.conf";
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP server");
  serve_cmd->add_option("--config", config_path, "Configuration file")->required();
  serve_cmd->callback([&] { action = [&] { std::exit(serve(config_path)); }; });

  auto* admin = app.add_subcommand("admin", "Offline administration on the data directory");
  admin->require_subcommand(1);
  admin->add_option("--config", config_path, "Configuration file");
  std::string admin_user;
  auto* create = admin->add_subcommand("create-admin", "Grant the administrator flag");
  create->add_option("username", admin_user)->required();
  create->callback([&] { action = [&] { std::exit(create_admin(config_path, admin_user)); }; });

  auto* demo_cmd = app.add_subcommand("demo", "Seed the Dalian walkthrough accounts");
  demo_cmd->add_option("--config", config_path, "Configuration file");
  demo_cmd->callback([&] { action = [&] { std::exit(demo(config_path)); }; });

  ClientCtx ctx;
  add_client(app, ctx, action);

  CLI11_PARSE(app, argc, argv);
  try {
    if (action) action();
  } catch (const ApiError& e) {
    std::cerr << e.body().dump() << std::endl;
    return 2;
  } catch (const Error& e) {
    std::cerr << json{{"error", error_body(e)}}.dump() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
