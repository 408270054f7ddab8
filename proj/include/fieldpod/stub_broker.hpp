#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fieldpod/clock.hpp"
#include "fieldpod/net.hpp"

namespace fieldpod {

/// In-process MQTT 3.1.1 broker for tests and desk runs. Logs every accepted
/// PUBLISH, keeps retained messages, fans out to subscribers and can be
/// scripted to misbehave.
class StubBroker {
 public:
  struct LoggedPublish {
    std::string client_id;
    std::string topic;
    std::string payload;
    std::uint8_t qos = 0;
    bool retain = false;
  };

  explicit StubBroker(std::uint16_t port = 0);
  ~StubBroker();
  StubBroker(const StubBroker&) = delete;
  StubBroker& operator=(const StubBroker&) = delete;

  std::uint16_t port() const { return port_; }
  net::HostPort address() const { return {"127.0.0.1", port_}; }

  std::vector<LoggedPublish> log() const;
  void clear_log();
  std::optional<std::string> retained(const std::string& topic) const;
  std::size_t connections_accepted() const { return accepted_.load(); }
  std::size_t active_clients() const;

  /// While unavailable, new connections are closed right after accept and
  /// existing ones are dropped.
  void set_available(bool available);
  /// One-shot: after `n` more PUBLISH packets are accepted, the next PUBLISH
  /// closes the connection without being logged or acknowledged.
  void fail_after_publishes(std::size_t n);
  /// One-shot: the next PUBLISH closes the connection once its first byte arrives.
  void drop_on_next_publish_first_byte();
  /// Withhold PUBACKs (publishes are still logged).
  void suppress_acks(bool suppress);

  /// Publishes as if another client sent it (fans out, may retain).
  void inject(const std::string& topic, const std::string& payload, bool retain = false);

  /// Blocks until `pred(log())` holds or the timeout passes.
  bool wait_for(const std::function<bool(const std::vector<LoggedPublish>&)>& pred,
                Duration timeout) const;

 private:
  struct Client;
  void run();
  void wake();
  void handle_readable(Client& c);
  void close_client(Client& c);
  void deliver(const std::string& topic, const std::string& payload, bool retain);
  void send_to(Client& c, const std::vector<std::uint8_t>& bytes);

  net::Socket listener_;
  std::uint16_t port_ = 0;
  int wake_pipe_[2] = {-1, -1};
  std::thread thread_;
  std::atomic<bool> stop_{false};
  std::atomic<std::size_t> accepted_{0};

  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::vector<std::unique_ptr<Client>> clients_;
  std::vector<LoggedPublish> log_;
  std::map<std::string, std::string> retained_;
  std::vector<std::pair<std::string, std::string>> injected_;
  bool available_ = true;
  std::optional<std::size_t> fail_after_;
  bool drop_first_byte_ = false;
  bool suppress_acks_ = false;
};

}  // namespace fieldpod
