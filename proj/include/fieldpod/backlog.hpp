#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "fieldpod/telemetry.hpp"

namespace fieldpod {

/// DEFLATE framing used by the backlog file. Each frame is
///   u32 BE uncompressed length | u32 BE compressed length | raw DEFLATE bytes
/// and the uncompressed bytes are newline-separated `to_line` records.
std::vector<std::uint8_t> encode_frame(std::span<const TelemetryRecord> records);

struct FrameScan {
  std::vector<TelemetryRecord> records;
  std::size_t frames = 0;
  std::size_t valid_bytes = 0;     // prefix of the input made of whole frames
  std::size_t torn_bytes = 0;      // truncated final frame, discarded
  std::size_t corrupt_frames = 0;  // complete frames whose payload did not decode
};

/// Decodes as many whole frames as the buffer holds.
FrameScan scan_frames(std::span<const std::uint8_t> bytes);

/// Durable store-and-forward queue for telemetry that could not be delivered.
///
/// Appends are flushed before they return. Acknowledged sequence numbers and
/// the seq reservation live in a sidecar state file, so drained records are
/// never re-delivered after a restart. All members are safe to call from one
/// producer and one consumer thread concurrently.
class BacklogStore {
 public:
  static constexpr std::string_view kLogName = "telemetry.backlog";
  static constexpr std::string_view kStateName = "telemetry.backlog.state";

  struct Options {
    bool sync = true;  // fdatasync after each write
    std::uint64_t seq_block = 1024;
  };

  explicit BacklogStore(std::filesystem::path dir);
  BacklogStore(std::filesystem::path dir, Options options);
  ~BacklogStore();
  BacklogStore(const BacklogStore&) = delete;
  BacklogStore& operator=(const BacklogStore&) = delete;

  /// Allocates the next device sequence number. Monotone across restarts.
  std::uint64_t next_seq();

  /// Appends one record as its own batch. Throws Error(Precondition) if
  /// record.seq is not above every seq the store has seen, Error(Storage)
  /// when the write or flush fails.
  void append(const TelemetryRecord& record);
  /// Appends the records as a single compressed batch.
  void append_batch(std::span<const TelemetryRecord> records);

  /// Unacknowledged records in append order.
  std::vector<TelemetryRecord> pending() const;
  std::size_t size() const;
  bool empty() const { return size() == 0; }

  /// Marks everything up to and including `seq` as delivered (in memory).
  void ack_through(std::uint64_t seq);
  /// Persists acknowledgements and compacts the log when possible.
  void commit_acks();

  std::uint64_t acked_seq() const;
  std::uint64_t last_seq() const;

  /// What the last open found on disk.
  const FrameScan& recovery() const { return recovery_; }
  const std::filesystem::path& log_path() const { return log_path_; }

  /// Makes subsequent writes fail with Error(Storage). Used for fault injection.
  void set_write_failure(bool fail);

 private:
  void open_and_recover();
  void write_frame_locked(std::span<const TelemetryRecord> records);
  void write_state_locked();
  void compact_locked();

  std::filesystem::path dir_;
  std::filesystem::path log_path_;
  std::filesystem::path state_path_;
  Options options_;
  int fd_ = -1;
  mutable std::mutex mutex_;
  std::deque<TelemetryRecord> pending_;
  std::uint64_t acked_ = 0;           // persisted ack
  std::uint64_t acked_in_memory_ = 0;
  std::uint64_t high_water_ = 0;      // largest seq appended or acked
  std::uint64_t reserved_ = 0;        // seqs up to this may have been handed out
  std::uint64_t next_ = 1;
  std::size_t acked_in_log_ = 0;      // records still in the file but acknowledged
  bool write_failure_ = false;
  FrameScan recovery_;
};

}  // namespace fieldpod
