#include "lbs/gateway/wal.hpp"

#include <csignal>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

namespace lbs::gateway {
namespace {

constexpr std::size_t kHeader = 4 + 8 + 1;
constexpr std::uint32_t kMaxPayload = 64u << 20;

template <typename T>
void put(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename T>
T get(std::string_view in, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

std::uint32_t checksum(std::string_view bytes) {
  return static_cast<std::uint32_t>(crc32(0, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

[[noreturn]] void sys_fail(const std::string& what) {
  throw std::runtime_error(what + ": " + std::strerror(errno));
}

}  // namespace

std::string encode_record(const WalRecord& r) {
  std::string out;
  out.reserve(kHeader + r.payload.size() + 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(r.payload.size()));
  put<std::uint64_t>(out, r.seq);
  put<std::uint8_t>(out, r.tag);
  out += r.payload;
  put<std::uint32_t>(out, checksum(std::string_view(out).substr(4)));
  return out;
}

WalScan scan_wal(std::string_view bytes, std::uint64_t first_seq) {
  WalScan scan;
  scan.total_bytes = bytes.size();
  std::size_t at = 0;
  std::uint64_t expect = first_seq;
  while (at < bytes.size()) {
    if (bytes.size() - at < kHeader) {
      scan.problem = "torn record header at offset " + std::to_string(at);
      break;
    }
    const auto len = get<std::uint32_t>(bytes, at);
    if (len > kMaxPayload) {
      scan.problem = "implausible record length at offset " + std::to_string(at);
      break;
    }
    if (bytes.size() - at < kHeader + len + 4) {
      scan.problem = "torn record at offset " + std::to_string(at);
      break;
    }
    const auto body = bytes.substr(at + 4, 8 + 1 + len);
    if (checksum(body) != get<std::uint32_t>(bytes, at + kHeader + len)) {
      scan.problem = "checksum mismatch at offset " + std::to_string(at);
      break;
    }
    WalRecord r{get<std::uint64_t>(bytes, at + 4), get<std::uint8_t>(bytes, at + 12),
                std::string(bytes.substr(at + kHeader, len))};
    if (expect != 0 && r.seq != expect) {
      scan.problem = "sequence gap at offset " + std::to_string(at);
      break;
    }
    expect = r.seq + 1;
    scan.records.push_back(std::move(r));
    at += kHeader + len + 4;
    scan.valid_bytes = at;
  }
  return scan;
}

std::optional<std::string> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

WalScan read_wal(const std::filesystem::path& path, std::uint64_t first_seq) {
  auto bytes = read_file(path);
  if (!bytes) return {};
  return scan_wal(*bytes, first_seq);
}

WalWriter::WalWriter(std::filesystem::path path, bool sync) : path_(std::move(path)), sync_(sync) {
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) sys_fail("open " + path_.string());
  const auto end = ::lseek(fd_, 0, SEEK_END);
  if (end < 0) sys_fail("seek " + path_.string());
  size_ = static_cast<std::uint64_t>(end);
}

WalWriter::~WalWriter() {
  if (fd_ >= 0) ::close(fd_);
}

void WalWriter::write_all(const char* data, std::size_t n) {
  while (n > 0) {
    const auto w = ::write(fd_, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      sys_fail("write " + path_.string());
    }
    data += w;
    n -= static_cast<std::size_t>(w);
    size_ += static_cast<std::uint64_t>(w);
    written_ += static_cast<std::uint64_t>(w);
  }
}

void WalWriter::append(const WalRecord& r) {
  const auto bytes = encode_record(r);
  if (crash_after_ && written_ + bytes.size() >= *crash_after_) {
    write_all(bytes.data(), static_cast<std::size_t>(*crash_after_ - written_));
    ::raise(SIGKILL);
  }
  write_all(bytes.data(), bytes.size());
  if (sync_ && ::fdatasync(fd_) != 0) sys_fail("fdatasync " + path_.string());
}

void WalWriter::truncate(std::uint64_t size) {
  if (::ftruncate(fd_, static_cast<off_t>(size)) != 0) sys_fail("truncate " + path_.string());
  size_ = size;
  if (sync_ && ::fsync(fd_) != 0) sys_fail("fsync " + path_.string());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content, bool sync) {
  auto tmp = path;
  tmp += ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) sys_fail("open " + tmp.string());
  const char* p = content.data();
  std::size_t n = content.size();
  while (n > 0) {
    const auto w = ::write(fd, p, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      ::close(fd);
      sys_fail("write " + tmp.string());
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
  if (sync && ::fsync(fd) != 0) {
    ::close(fd);
    sys_fail("fsync " + tmp.string());
  }
  ::close(fd);
  std::filesystem::rename(tmp, path);
  if (sync) {
    const int dir = ::open(path.parent_path().empty() ? "." : path.parent_path().c_str(), O_RDONLY | O_DIRECTORY);
    if (dir >= 0) {
      ::fsync(dir);
      ::close(dir);
    }
  }
}

}  // namespace lbs::gateway
