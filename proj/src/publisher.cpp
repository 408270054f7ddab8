#include "fieldpod/publisher.hpp"

#include <vector>

#include <spdlog/spdlog.h>

#include "fieldpod/error.hpp"

namespace fieldpod {

void publish(BrokerSession& session, const TelemetryRecord& record) {
  session.publish(record.topic.str(), record.payload, 1, false);
}

std::size_t backlog_drain(BacklogStore& store, BrokerSession& session) {
  std::size_t delivered = 0;
  for (const auto& record : store.pending()) {
    try {
      publish(session, record);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Transport) throw;
      spdlog::warn("backlog: drain stopped at seq {}: {}", record.seq, e.what());
      break;
    }
    store.ack_through(record.seq);
    ++delivered;
  }
  if (delivered > 0) store.commit_acks();
  return delivered;
}

TelemetryPublisher::TelemetryPublisher(BacklogStore& store, BrokerSession& session,
                                       const Clock& clock, Options options)
    : store_(store), session_(session), clock_(clock), options_(std::move(options)) {
  validate_topic_prefix(options_.topic_prefix);
}

bool TelemetryPublisher::ensure_connected() {
  if (session_.connected()) return true;
  const auto now = clock_.now();
  if (last_attempt_ && now - *last_attempt_ < options_.retry_interval) return false;
  last_attempt_ = now;
  try {
    session_.connect();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Transport) throw;
    spdlog::debug("telemetry: broker unavailable: {}", e.what());
    return false;
  }
  last_attempt_.reset();
  if (on_connect_) on_connect_();
  return session_.connected();
}

std::size_t TelemetryPublisher::flush() {
  if (store_.empty() || !ensure_connected()) return 0;
  return backlog_drain(store_, session_);
}

TelemetryPublisher::Outcome TelemetryPublisher::submit(std::span<const SensorReading> readings) {
  std::vector<TelemetryRecord> records;
  records.reserve(readings.size());
  for (const auto& r : readings) {
    records.push_back(TelemetryRecord{store_.next_seq(), topic_for(r.kind, options_.topic_prefix),
                                      encode_payload(r), r.timestamp});
    if (on_record_) on_record_(records.back());
  }

  Outcome out;
  std::size_t first_undelivered = 0;
  if (ensure_connected()) {
    if (!store_.empty()) out.drained = backlog_drain(store_, session_);
    if (store_.empty()) {
      for (; first_undelivered < records.size(); ++first_undelivered) {
        try {
          publish(session_, records[first_undelivered]);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::Transport) throw;
          spdlog::warn("telemetry: live publish failed, backlogging: {}", e.what());
          break;
        }
        ++out.live;
      }
    }
  }
  const std::span<const TelemetryRecord> rest(records.begin() + static_cast<std::ptrdiff_t>(first_undelivered),
                                              records.end());
  if (!rest.empty()) {
    store_.append_batch(rest);
    out.backlogged = rest.size();
  }
  return out;
}

}  // namespace fieldpod
