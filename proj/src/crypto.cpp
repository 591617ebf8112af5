#include "lbs/crypto.hpp"

#include <array>
#include <stdexcept>
#include <vector>

#include <sodium.h>

#include "lbs/error.hpp"

namespace lbs {
namespace {

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

constexpr std::size_t kSaltBytes = crypto_pwhash_SALTBYTES;
constexpr std::size_t kHashBytes = 32;

std::string b64(std::span<const std::uint8_t> bytes, int variant) {
  std::string out(sodium_base64_encoded_len(bytes.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), variant);
  out.resize(std::char_traits<char>::length(out.c_str()));
  return out;
}

}  // namespace

std::uint32_t RandomSource::uniform(std::uint32_t bound) {
  if (bound <= 1) return 0;
  // Rejection sampling for an unbiased result.
  const std::uint32_t limit = UINT32_MAX - UINT32_MAX % bound;
  while (true) {
    std::array<std::uint8_t, 4> b{};
    fill(b);
    const std::uint32_t v = std::uint32_t{b[0]} | std::uint32_t{b[1]} << 8 |
                            std::uint32_t{b[2]} << 16 | std::uint32_t{b[3]} << 24;
    if (v < limit) return v % bound;
  }
}

SystemRandom::SystemRandom() { ensure_sodium(); }

void SystemRandom::fill(std::span<std::uint8_t> out) { randombytes_buf(out.data(), out.size()); }

void SeededRandom::fill(std::span<std::uint8_t> out) {
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < out.size(); i += 8) {
    const std::uint64_t v = engine_();
    for (std::size_t j = 0; j < 8 && i + j < out.size(); ++j) {
      out[i + j] = static_cast<std::uint8_t>(v >> (8 * j));
    }
  }
}

std::string sha256_hex(std::string_view bytes) {
  ensure_sodium();
  std::array<unsigned char, crypto_hash_sha256_BYTES> digest{};
  crypto_hash_sha256(digest.data(), reinterpret_cast<const unsigned char*>(bytes.data()),
                     bytes.size());
  std::string hex(digest.size() * 2 + 1, '\0');
  sodium_bin2hex(hex.data(), hex.size(), digest.data(), digest.size());
  hex.pop_back();
  return hex;
}

std::string base64_encode(std::string_view bytes) {
  ensure_sodium();
  return b64({reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()},
             sodium_base64_VARIANT_ORIGINAL);
}

std::string base64_decode(std::string_view text) {
  ensure_sodium();
  std::string out(text.size() / 4 * 3 + 3, '\0');
  std::size_t len = 0;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), text.data(),
                        text.size(), " \r\n", &len, nullptr, sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw Error(ErrorCode::BadRequest, "malformed base64 payload");
  }
  out.resize(len);
  return out;
}

std::string base64url_encode(std::span<const std::uint8_t> bytes) {
  ensure_sodium();
  return b64(bytes, sodium_base64_VARIANT_URLSAFE_NO_PADDING);
}

std::string random_token(RandomSource& rng) {
  std::array<std::uint8_t, 16> bytes{};
  rng.fill(bytes);
  return base64url_encode(bytes);
}

std::string random_code(RandomSource& rng) {
  const auto n = rng.uniform(1'000'000);
  std::string s = std::to_string(n);
  return std::string(6 - s.size(), '0') + s;
}

PasswordHasher::PasswordHasher(Cost cost) {
  ensure_sodium();
  if (cost == Cost::Interactive) {
    opslimit_ = crypto_pwhash_OPSLIMIT_INTERACTIVE;
    memlimit_ = crypto_pwhash_MEMLIMIT_INTERACTIVE;
  } else {
    opslimit_ = crypto_pwhash_OPSLIMIT_MIN;
    memlimit_ = crypto_pwhash_MEMLIMIT_MIN;
  }
}

std::string PasswordHasher::hash(std::string_view password, RandomSource& rng) const {
  std::array<std::uint8_t, kSaltBytes> salt{};
  rng.fill(salt);
  std::array<std::uint8_t, kHashBytes> out{};
  if (crypto_pwhash(out.data(), out.size(), password.data(), password.size(), salt.data(),
                    opslimit_, memlimit_, crypto_pwhash_ALG_ARGON2ID13) != 0) {
    throw std::runtime_error("password hashing ran out of memory");
  }
  return "$argon2id$v=19$m=" + std::to_string(memlimit_ / 1024) + ",t=" + std::to_string(opslimit_) +
         ",p=1$" + b64(salt, sodium_base64_VARIANT_ORIGINAL_NO_PADDING) + "$" +
         b64(out, sodium_base64_VARIANT_ORIGINAL_NO_PADDING);
}

bool PasswordHasher::verify(std::string_view password, const std::string& digest) {
  ensure_sodium();
  if (digest.empty()) return false;
  return crypto_pwhash_str_verify(digest.c_str(), password.data(), password.size()) == 0;
}

}  // namespace lbs
