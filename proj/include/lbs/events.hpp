#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "lbs/json.hpp"

namespace lbs::events {

inline constexpr std::size_t kRetention = 10'000;

struct Event {
  std::uint64_t seq = 0;
  std::string type;
  json payload;
  Millis at = 0;
  // Content that may only live until the client has seen it (chat sent
  // while history saving is off). Dropped once acknowledged.
  bool transient = false;
};

void to_json(json& j, const Event& e);
void from_json(const json& j, Event& e);

/// Per-user ordered event streams. Sequence numbers start at 1 and never
/// repeat within a stream, even after retention trims the front.
class EventHub {
 public:
  std::uint64_t push(const std::string& user, std::string type, json payload, Millis at,
                     bool transient = false);
  std::vector<Event> since(const std::string& user, std::uint64_t since,
                           std::size_t limit = kRetention) const;
  std::uint64_t latest(const std::string& user) const;
  /// Drops transient events with seq <= `upto`; returns how many.
  std::size_t ack(const std::string& user, std::uint64_t upto);
  bool has_transient_upto(const std::string& user, std::uint64_t upto) const;
  std::size_t size(const std::string& user) const;

  json snapshot() const;
  void restore(const json& j);

 private:
  struct Stream {
    std::uint64_t next = 1;
    std::deque<Event> events;
  };
  std::map<std::string, Stream> streams_;
};

}  // namespace lbs::events
