#include "lbs/events.hpp"

#include <algorithm>

namespace lbs::events {

void to_json(json& j, const Event& e) {
  j = json{{"seq", e.seq}, {"type", e.type}, {"payload", e.payload}, {"at", e.at}, {"transient", e.transient}};
}

void from_json(const json& j, Event& e) {
  e.seq = j.at("seq").get<std::uint64_t>();
  e.type = j.at("type").get<std::string>();
  e.payload = j.at("payload");
  e.at = j.at("at").get<Millis>();
  e.transient = j.value("transient", false);
}

std::uint64_t EventHub::push(const std::string& user, std::string type, json payload, Millis at,
                             bool transient) {
  auto& s = streams_[user];
  const auto seq = s.next++;
  s.events.push_back(Event{seq, std::move(type), std::move(payload), at, transient});
  while (s.events.size() > kRetention) s.events.pop_front();
  return seq;
}

std::vector<Event> EventHub::since(const std::string& user, std::uint64_t since,
                                   std::size_t limit) const {
  std::vector<Event> out;
  auto it = streams_.find(user);
  if (it == streams_.end()) return out;
  const auto& ev = it->second.events;
  auto first = std::upper_bound(ev.begin(), ev.end(), since,
                                [](std::uint64_t s, const Event& e) { return s < e.seq; });
  for (; first != ev.end() && out.size() < limit; ++first) out.push_back(*first);
  return out;
}

std::uint64_t EventHub::latest(const std::string& user) const {
  auto it = streams_.find(user);
  return it == streams_.end() ? 0 : it->second.next - 1;
}

std::size_t EventHub::ack(const std::string& user, std::uint64_t upto) {
  auto it = streams_.find(user);
  if (it == streams_.end()) return 0;
  return std::erase_if(it->second.events,
                       [upto](const Event& e) { return e.transient && e.seq <= upto; });
}

bool EventHub::has_transient_upto(const std::string& user, std::uint64_t upto) const {
  auto it = streams_.find(user);
  if (it == streams_.end()) return false;
  for (const auto& e : it->second.events) {
    if (e.seq > upto) break;
    if (e.transient) return true;
  }
  return false;
}

std::size_t EventHub::size(const std::string& user) const {
  auto it = streams_.find(user);
  return it == streams_.end() ? 0 : it->second.events.size();
}

json EventHub::snapshot() const {
  json out = json::object();
  for (const auto& [user, s] : streams_) {
    out[user] = json{{"next", s.next}, {"events", s.events}};
  }
  return out;
}

void EventHub::restore(const json& j) {
  streams_.clear();
  for (const auto& [user, s] : j.items()) {
    auto& st = streams_[user];
    st.next = s.at("next").get<std::uint64_t>();
    for (const auto& e : s.at("events")) st.events.push_back(e.get<Event>());
  }
}

}  // namespace lbs::events
