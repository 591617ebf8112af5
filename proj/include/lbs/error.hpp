#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lbs {

/// Every failure the platform can report. The enumerator name is the wire
/// code: `to_string(ErrorCode::StaleUpdate) == "StaleUpdate"`.
enum class ErrorCode {
  // generic
  BadRequest,
  NotFound,
  InvalidCoordinate,
  InvalidField,
  // geomath
  OutOfProjectionRange,
  // localization
  InsufficientBeacons,
  DegenerateGeometry,
  NoConvergence,
  AmbiguousSolution,
  EmptyInput,
  InvalidMeasurement,
  // geostore
  StaleUpdate,
  RadiusOutOfRange,
  // identity
  DuplicateUsername,
  MissingField,
  InvalidUsername,
  InvalidEmail,
  InvalidPhone,
  BadCode,
  Expired,
  AlreadyActivated,
  BadCredentials,
  NotActivated,
  UnknownUser,
  Unauthorized,
  ImmutableField,
  // social
  SelfFriendship,
  AlreadyFriends,
  NoPendingRequest,
  DefaultGroupProtected,
  DuplicateGroupName,
  UnknownGroup,
  NoFixForViewer,
  // messaging
  NotFriends,
  BodyTooLarge,
  NotYourMail,
  UnknownMail,
  TooLarge,
  UnknownBlob,
  // content
  NotVisible,
  TooLong,
  AlreadyPublished,
  UnknownAlbum,
  UnknownPhoto,
  // localinfo
  UnknownCity,
  ProviderUnavailable,
  UnknownSection,
  NotAdmin,
  UnknownPost,
  NotApproved,
  // gateway
  MalformedQuery,
  TileOutOfRange,
  UpstreamUnavailable,
  CorruptLog,
};

std::string_view to_string(ErrorCode code) noexcept;
std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept;
const std::vector<ErrorCode>& all_error_codes();

/// HTTP status used when the code crosses the API boundary.
int http_status(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, bool recovery_hint = false)
      : std::runtime_error(message), code_(code), recovery_hint_(recovery_hint) {}
  explicit Error(ErrorCode code)
      : Error(code, std::string(to_string(code))) {}

  ErrorCode code() const noexcept { return code_; }
  bool recovery_hint() const noexcept { return recovery_hint_; }

 private:
  ErrorCode code_;
  bool recovery_hint_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

/// Milliseconds since the Unix epoch.
using Millis = std::int64_t;

}  // namespace lbs
