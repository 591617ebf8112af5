#pragma once

#include <cstdint>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace lbs {

/// Source of random bytes. Production uses the OS CSPRNG; tests inject a
/// seeded generator so that whole workloads replay bit-for-bit.
class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  /// Uniform in [0, bound).
  std::uint32_t uniform(std::uint32_t bound);
};

class SystemRandom final : public RandomSource {
 public:
  SystemRandom();
  void fill(std::span<std::uint8_t> out) override;
};

class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
  void fill(std::span<std::uint8_t> out) override;

 private:
  std::mutex mutex_;
  std::mt19937_64 engine_;
};

std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
/// Throws Error{BadRequest} on malformed input.
std::string base64_decode(std::string_view text);
/// URL-safe alphabet, no padding.
std::string base64url_encode(std::span<const std::uint8_t> bytes);

/// 128 random bits, URL-safe base64 (22 characters).
std::string random_token(RandomSource& rng);
/// Six decimal digits, leading zeros kept.
std::string random_code(RandomSource& rng);

/// Argon2id password digests in the standard PHC string format
/// ($argon2id$v=19$m=...,t=...,p=1$salt$hash).
class PasswordHasher {
 public:
  enum class Cost { Interactive, Minimal };

  explicit PasswordHasher(Cost cost = Cost::Interactive);

  std::string hash(std::string_view password, RandomSource& rng) const;
  /// Constant-time comparison against a digest produced by `hash` (or by
  /// any other libsodium Argon2id string producer).
  static bool verify(std::string_view password, const std::string& digest);

 private:
  unsigned long long opslimit_;
  std::size_t memlimit_;
};

}  // namespace lbs
