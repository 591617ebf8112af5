#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lbs::gateway {

inline constexpr std::uint8_t kCommandTag = 1;

/// On disk: u32 payload length | u64 seq | u8 tag | payload | u32 crc32,
/// little-endian; the CRC covers seq, tag and payload.
struct WalRecord {
  std::uint64_t seq = 0;
  std::uint8_t tag = kCommandTag;
  std::string payload;

  friend bool operator==(const WalRecord&, const WalRecord&) = default;
};

std::string encode_record(const WalRecord& r);

struct WalScan {
  std::vector<WalRecord> records;
  std::uint64_t valid_bytes = 0;  // length of the intact prefix
  std::uint64_t total_bytes = 0;
  std::optional<std::string> problem;  // why scanning stopped early
};

/// Decodes the longest valid prefix. Stops at a torn or corrupt record, or
/// at a sequence gap (`first_seq` = expected seq of the first record, 0 to
/// accept any start).
WalScan scan_wal(std::string_view bytes, std::uint64_t first_seq = 0);
WalScan read_wal(const std::filesystem::path& path, std::uint64_t first_seq = 0);

class WalWriter {
 public:
  WalWriter(std::filesystem::path path, bool sync);
  ~WalWriter();
  WalWriter(const WalWriter&) = delete;
  WalWriter& operator=(const WalWriter&) = delete;

  void append(const WalRecord& r);
  /// Cuts the file to `size` bytes (drops a torn tail).
  void truncate(std::uint64_t size);
  std::uint64_t size() const { return size_; }

  /// Fault injection for crash tests: once `bytes` have been written in
  /// total (across truncations), the process kills itself mid-write.
  void crash_after(std::uint64_t bytes) { crash_after_ = bytes; }

 private:
  void write_all(const char* data, std::size_t n);

  std::filesystem::path path_;
  bool sync_;
  int fd_ = -1;
  std::uint64_t size_ = 0;
  std::uint64_t written_ = 0;
  std::optional<std::uint64_t> crash_after_;
};

/// Atomic replace: write to a temporary, sync, rename over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content, bool sync);
std::optional<std::string> read_file(const std::filesystem::path& path);

}  // namespace lbs::gateway
