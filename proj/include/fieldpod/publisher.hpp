#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "fieldpod/backlog.hpp"
#include "fieldpod/broker_session.hpp"
#include "fieldpod/clock.hpp"
#include "fieldpod/sensing.hpp"
#include "fieldpod/telemetry.hpp"

namespace fieldpod {

/// Publishes one record at QoS 1 without the retain flag. Throws
/// Error(Transport) when the broker is unreachable or drops mid-flight; the
/// record then counts as undelivered.
void publish(BrokerSession& session, const TelemetryRecord& record);

/// Publishes backlogged records oldest-first, acknowledging each in the store,
/// and stops at the first transport error. Returns how many were delivered.
std::size_t backlog_drain(BacklogStore& store, BrokerSession& session);

/// Store-and-forward publisher: backlog drains before live data, and anything
/// that cannot be delivered is appended to the backlog.
class TelemetryPublisher {
 public:
  struct Options {
    std::string topic_prefix{kDefaultTopicPrefix};
    /// Minimum wall time between reconnect attempts after a failure.
    Duration retry_interval = Duration::zero();
  };

  struct Outcome {
    std::size_t live = 0;
    std::size_t drained = 0;
    std::size_t backlogged = 0;
  };

  TelemetryPublisher(BacklogStore& store, BrokerSession& session, const Clock& clock, Options options);

  /// Turns readings into records and delivers or backlogs them. Storage
  /// failures propagate as Error(Storage).
  Outcome submit(std::span<const SensorReading> readings);

  /// Connects if needed and drains the backlog.
  std::size_t flush();

  bool ensure_connected();

  /// Invoked after every successful (re)connect.
  void on_connect(std::function<void()> callback) { on_connect_ = std::move(callback); }

  /// Every record handed to the broker or the backlog, for inspection.
  void on_record(std::function<void(const TelemetryRecord&)> callback) { on_record_ = std::move(callback); }

 private:
  BacklogStore& store_;
  BrokerSession& session_;
  const Clock& clock_;
  Options options_;
  std::optional<Instant> last_attempt_;
  std::function<void()> on_connect_;
  std::function<void(const TelemetryRecord&)> on_record_;
};

}  // namespace fieldpod
