#include "fieldpod/backlog.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fieldpod/error.hpp"

namespace fieldpod {

namespace {

constexpr std::size_t kHeaderSize = 8;
constexpr std::size_t kCompactThreshold = 4096;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

std::vector<std::uint8_t> deflate_raw(std::string_view input) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorCode::Storage, "deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(input.size())));
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(input.data()));
  zs.avail_in = static_cast<uInt>(input.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::Storage, "deflate did not finish");
  out.resize(produced);
  return out;
}

bool inflate_raw(std::span<const std::uint8_t> input, std::size_t expected, std::string& out) {
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) return false;
  out.assign(expected, '\0');
  zs.next_in = const_cast<Bytef*>(input.data());
  zs.avail_in = static_cast<uInt>(input.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const bool ok = rc == Z_STREAM_END && zs.total_out == expected && zs.avail_in == 0;
  inflateEnd(&zs);
  return ok;
}

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::write(fd, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Storage, fmt::format("backlog write failed: {}", std::strerror(errno)));
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

void sync_dir(const std::filesystem::path& dir) {
  const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (dfd >= 0) {
    ::fsync(dfd);
    ::close(dfd);
  }
}

}  // namespace

std::vector<std::uint8_t> encode_frame(std::span<const TelemetryRecord> records) {
  std::string plain;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i) plain.push_back('\n');
    plain += to_line(records[i]);
  }
  const auto packed = deflate_raw(plain);
  std::vector<std::uint8_t> frame;
  frame.reserve(kHeaderSize + packed.size());
  put_u32(frame, static_cast<std::uint32_t>(plain.size()));
  put_u32(frame, static_cast<std::uint32_t>(packed.size()));
  frame.insert(frame.end(), packed.begin(), packed.end());
  return frame;
}

FrameScan scan_frames(std::span<const std::uint8_t> bytes) {
  FrameScan scan;
  std::size_t pos = 0;
  std::string plain;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < kHeaderSize) break;
    const std::uint32_t ulen = get_u32(bytes.data() + pos);
    const std::uint32_t clen = get_u32(bytes.data() + pos + 4);
    if (bytes.size() - pos - kHeaderSize < clen) break;
    const auto payload = bytes.subspan(pos + kHeaderSize, clen);
    pos += kHeaderSize + clen;
    scan.valid_bytes = pos;
    if (!inflate_raw(payload, ulen, plain)) {
      ++scan.corrupt_frames;
      continue;
    }
    std::vector<TelemetryRecord> batch;
    try {
      std::string_view rest = plain;
      while (!rest.empty()) {
        const auto nl = rest.find('\n');
        batch.push_back(from_line(rest.substr(0, nl)));
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
      }
    } catch (const Error&) {
      ++scan.corrupt_frames;
      continue;
    }
    scan.records.insert(scan.records.end(), batch.begin(), batch.end());
    ++scan.frames;
  }
  scan.torn_bytes = bytes.size() - scan.valid_bytes;
  return scan;
}

BacklogStore::BacklogStore(std::filesystem::path dir) : BacklogStore(std::move(dir), Options{}) {}

BacklogStore::BacklogStore(std::filesystem::path dir, Options options)
    : dir_(std::move(dir)),
      log_path_(dir_ / kLogName),
      state_path_(dir_ / kStateName),
      options_(options) {
  open_and_recover();
}

BacklogStore::~BacklogStore() {
  if (fd_ >= 0) ::close(fd_);
}

void BacklogStore::open_and_recover() {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::Storage, "cannot create data dir " + dir_.string() + ": " + ec.message());

  if (std::ifstream st(state_path_); st) {
    std::string key;
    std::uint64_t value = 0;
    while (st >> key >> value) {
      if (key == "acked") acked_ = value;
      if (key == "reserved") reserved_ = value;
    }
  }

  fd_ = ::open(log_path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw Error(ErrorCode::Storage,
                fmt::format("cannot open {}: {}", log_path_.string(), std::strerror(errno)));
  }
  std::vector<std::uint8_t> bytes;
  {
    std::ifstream in(log_path_, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  recovery_ = scan_frames(bytes);
  if (recovery_.torn_bytes > 0) {
    spdlog::warn("backlog: discarding torn tail of {} bytes in {}", recovery_.torn_bytes,
                 log_path_.string());
    if (::ftruncate(fd_, static_cast<off_t>(recovery_.valid_bytes)) != 0) {
      throw Error(ErrorCode::Storage, "cannot truncate torn backlog tail");
    }
  }
  if (recovery_.corrupt_frames > 0) {
    spdlog::error("backlog: skipped {} undecodable frame(s) in {}", recovery_.corrupt_frames,
                  log_path_.string());
  }
  ::lseek(fd_, 0, SEEK_END);

  high_water_ = acked_;
  for (const auto& r : recovery_.records) {
    high_water_ = std::max(high_water_, r.seq);
    if (r.seq > acked_) {
      pending_.push_back(r);
    } else {
      ++acked_in_log_;
    }
  }
  acked_in_memory_ = acked_;
  next_ = std::max(reserved_, high_water_) + 1;
  if (pending_.empty() && !recovery_.records.empty()) compact_locked();
}

std::uint64_t BacklogStore::next_seq() {
  std::lock_guard lock(mutex_);
  const std::uint64_t seq = next_++;
  if (seq > reserved_) {
    reserved_ = seq + options_.seq_block - 1;
    write_state_locked();
  }
  return seq;
}

void BacklogStore::append(const TelemetryRecord& record) { append_batch({&record, 1}); }

void BacklogStore::append_batch(std::span<const TelemetryRecord> records) {
  if (records.empty()) return;
  std::lock_guard lock(mutex_);
  std::uint64_t prev = high_water_;
  for (const auto& r : records) {
    if (r.seq <= prev) {
      throw Error(ErrorCode::Precondition,
                  fmt::format("backlog append seq {} is not above {}", r.seq, prev), "seq");
    }
    prev = r.seq;
  }
  write_frame_locked(records);
  pending_.insert(pending_.end(), records.begin(), records.end());
  high_water_ = prev;
  if (next_ <= high_water_) next_ = high_water_ + 1;
}

void BacklogStore::write_frame_locked(std::span<const TelemetryRecord> records) {
  if (write_failure_) throw Error(ErrorCode::Storage, "backlog storage unavailable (injected)");
  const auto frame = encode_frame(records);
  const off_t before = ::lseek(fd_, 0, SEEK_END);
  try {
    write_all(fd_, frame.data(), frame.size());
    if (options_.sync && ::fdatasync(fd_) != 0) {
      throw Error(ErrorCode::Storage, fmt::format("backlog flush failed: {}", std::strerror(errno)));
    }
  } catch (const Error&) {
    if (before >= 0 && ::ftruncate(fd_, before) == 0) ::lseek(fd_, before, SEEK_SET);
    throw;
  }
}

std::vector<TelemetryRecord> BacklogStore::pending() const {
  std::lock_guard lock(mutex_);
  return {pending_.begin(), pending_.end()};
}

std::size_t BacklogStore::size() const {
  std::lock_guard lock(mutex_);
  return pending_.size();
}

void BacklogStore::ack_through(std::uint64_t seq) {
  std::lock_guard lock(mutex_);
  while (!pending_.empty() && pending_.front().seq <= seq) {
    pending_.pop_front();
    ++acked_in_log_;
  }
  acked_in_memory_ = std::max(acked_in_memory_, seq);
  high_water_ = std::max(high_water_, seq);
}

void BacklogStore::commit_acks() {
  std::lock_guard lock(mutex_);
  if (acked_in_memory_ == acked_) return;
  acked_ = acked_in_memory_;
  write_state_locked();
  if (pending_.empty() || acked_in_log_ >= kCompactThreshold) compact_locked();
}

std::uint64_t BacklogStore::acked_seq() const {
  std::lock_guard lock(mutex_);
  return acked_in_memory_;
}

std::uint64_t BacklogStore::last_seq() const {
  std::lock_guard lock(mutex_);
  return high_water_;
}

void BacklogStore::set_write_failure(bool fail) {
  std::lock_guard lock(mutex_);
  write_failure_ = fail;
}

void BacklogStore::write_state_locked() {
  if (write_failure_) throw Error(ErrorCode::Storage, "backlog storage unavailable (injected)");
  const auto tmp = state_path_.string() + ".tmp";
  const std::string body = fmt::format("acked {}\nreserved {}\n", acked_, reserved_);
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::Storage, "cannot write backlog state: " + std::string(std::strerror(errno)));
  try {
    write_all(fd, reinterpret_cast<const std::uint8_t*>(body.data()), body.size());
    if (options_.sync && ::fsync(fd) != 0) throw Error(ErrorCode::Storage, "backlog state flush failed");
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  if (std::rename(tmp.c_str(), state_path_.c_str()) != 0) {
    throw Error(ErrorCode::Storage, "cannot replace backlog state file");
  }
  if (options_.sync) sync_dir(dir_);
}

// Rewrites the log so it holds only pending records. Called with acks
// already persisted, so a crash at any point leaves a consistent pair.
void BacklogStore::compact_locked() {
  if (pending_.empty()) {
    if (::ftruncate(fd_, 0) != 0) {
      throw Error(ErrorCode::Storage, "cannot truncate backlog log");
    }
    ::lseek(fd_, 0, SEEK_SET);
    if (options_.sync) ::fdatasync(fd_);
    acked_in_log_ = 0;
    return;
  }
  const auto tmp = log_path_.string() + ".compact";
  const int fd = ::open(tmp.c_str(), O_RDWR | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::Storage, "cannot create compacted backlog");
  const std::vector<TelemetryRecord> keep(pending_.begin(), pending_.end());
  const auto frame = encode_frame(keep);
  try {
    write_all(fd, frame.data(), frame.size());
    if (options_.sync && ::fsync(fd) != 0) throw Error(ErrorCode::Storage, "compacted backlog flush failed");
  } catch (...) {
    ::close(fd);
    throw;
  }
  if (std::rename(tmp.c_str(), log_path_.c_str()) != 0) {
    ::close(fd);
    throw Error(ErrorCode::Storage, "cannot replace backlog log");
  }
  ::close(fd_);
  fd_ = fd;
  ::lseek(fd_, 0, SEEK_END);
  if (options_.sync) sync_dir(dir_);
  acked_in_log_ = 0;
}

}  // namespace fieldpod
