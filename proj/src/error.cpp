#include "lbs/error.hpp"

#include <array>
#include <utility>

namespace lbs {
namespace {

#define LBS_CODE(name) std::pair{ErrorCode::name, std::string_view{#name}}

constexpr std::array kCodes{
    LBS_CODE(BadRequest),         LBS_CODE(NotFound),
    LBS_CODE(InvalidCoordinate),  LBS_CODE(InvalidField),
    LBS_CODE(OutOfProjectionRange),
    LBS_CODE(InsufficientBeacons), LBS_CODE(DegenerateGeometry),
    LBS_CODE(NoConvergence),      LBS_CODE(AmbiguousSolution),
    LBS_CODE(EmptyInput),         LBS_CODE(InvalidMeasurement),
    LBS_CODE(StaleUpdate),        LBS_CODE(RadiusOutOfRange),
    LBS_CODE(DuplicateUsername),  LBS_CODE(MissingField),
    LBS_CODE(InvalidUsername),    LBS_CODE(InvalidEmail),
    LBS_CODE(InvalidPhone),       LBS_CODE(BadCode),
    LBS_CODE(Expired),            LBS_CODE(AlreadyActivated),
    LBS_CODE(BadCredentials),     LBS_CODE(NotActivated),
    LBS_CODE(UnknownUser),        LBS_CODE(Unauthorized),
    LBS_CODE(ImmutableField),     LBS_CODE(SelfFriendship),
    LBS_CODE(AlreadyFriends),     LBS_CODE(NoPendingRequest),
    LBS_CODE(DefaultGroupProtected), LBS_CODE(DuplicateGroupName),
    LBS_CODE(UnknownGroup),       LBS_CODE(NoFixForViewer),
    LBS_CODE(NotFriends),         LBS_CODE(BodyTooLarge),
    LBS_CODE(NotYourMail),        LBS_CODE(UnknownMail),
    LBS_CODE(TooLarge),           LBS_CODE(UnknownBlob),
    LBS_CODE(NotVisible),         LBS_CODE(TooLong),
    LBS_CODE(AlreadyPublished),   LBS_CODE(UnknownAlbum),
    LBS_CODE(UnknownPhoto),       LBS_CODE(UnknownCity),
    LBS_CODE(ProviderUnavailable), LBS_CODE(UnknownSection),
    LBS_CODE(NotAdmin),           LBS_CODE(UnknownPost),
    LBS_CODE(NotApproved),        LBS_CODE(MalformedQuery),
    LBS_CODE(TileOutOfRange),     LBS_CODE(UpstreamUnavailable),
    LBS_CODE(CorruptLog),
};

#undef LBS_CODE

}  // namespace

std::string_view to_string(ErrorCode code) noexcept {
  for (const auto& [c, name] : kCodes) {
    if (c == code) return name;
  }
  return "Unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) noexcept {
  for (const auto& [c, n] : kCodes) {
    if (n == name) return c;
  }
  return std::nullopt;
}

const std::vector<ErrorCode>& all_error_codes() {
  static const std::vector<ErrorCode> codes = [] {
    std::vector<ErrorCode> out;
    for (const auto& entry : kCodes) out.push_back(entry.first);
    return out;
  }();
  return codes;
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Unauthorized:
    case ErrorCode::BadCredentials:
      return 401;
    case ErrorCode::NotActivated:
    case ErrorCode::NotAdmin:
    case ErrorCode::NotVisible:
    case ErrorCode::NotYourMail:
    case ErrorCode::NotFriends:
    case ErrorCode::DefaultGroupProtected:
    case ErrorCode::ImmutableField:
      return 403;
    case ErrorCode::NotFound:
    case ErrorCode::UnknownUser:
    case ErrorCode::UnknownGroup:
    case ErrorCode::UnknownMail:
    case ErrorCode::UnknownBlob:
    case ErrorCode::UnknownAlbum:
    case ErrorCode::UnknownPhoto:
    case ErrorCode::UnknownCity:
    case ErrorCode::UnknownPost:
    case ErrorCode::UnknownSection:
      return 404;
    case ErrorCode::DuplicateUsername:
    case ErrorCode::AlreadyActivated:
    case ErrorCode::AlreadyFriends:
    case ErrorCode::AlreadyPublished:
    case ErrorCode::DuplicateGroupName:
    case ErrorCode::StaleUpdate:
    case ErrorCode::AmbiguousSolution:
      return 409;
    case ErrorCode::Expired:
      return 410;
    case ErrorCode::TooLarge:
    case ErrorCode::BodyTooLarge:
      return 413;
    case ErrorCode::UpstreamUnavailable:
    case ErrorCode::ProviderUnavailable:
      return 503;
    case ErrorCode::CorruptLog:
      return 500;
    default:
      return 400;
  }
}

}  // namespace lbs
