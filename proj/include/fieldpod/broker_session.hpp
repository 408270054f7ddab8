#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "fieldpod/clock.hpp"
#include "fieldpod/mqtt.hpp"
#include "fieldpod/net.hpp"

namespace fieldpod {

struct InboundMessage {
  std::string topic;
  std::string payload;
  bool retain = false;
};

/// A publisher-side connection to an MQTT broker. Every failing operation
/// throws Error(Transport) and leaves the session disconnected.
class BrokerSession {
 public:
  virtual ~BrokerSession() = default;

  virtual void connect() = 0;
  virtual bool connected() const = 0;
  virtual void disconnect() noexcept = 0;
  /// Returns once the broker acknowledged (qos 1) or the bytes were sent (qos 0).
  virtual void publish(std::string_view topic, std::string_view payload, std::uint8_t qos,
                       bool retain) = 0;
  /// Filters are remembered and re-subscribed on every reconnect.
  virtual void subscribe(std::string_view filter) = 0;
  /// Messages received on subscribed topics since the last poll. Non-blocking.
  virtual std::vector<InboundMessage> poll() = 0;
};

struct MqttOptions {
  net::HostPort address{"10.4.1.100", 1883};
  std::string client_id = "fieldpod";
  std::uint16_t keepalive_s = 60;
  Duration connect_timeout = std::chrono::seconds{2};
  Duration io_timeout = std::chrono::seconds{2};
};

/// MQTT 3.1.1 client over plain TCP.
class MqttSession final : public BrokerSession {
 public:
  explicit MqttSession(MqttOptions options);

  void connect() override;
  bool connected() const override { return socket_.valid(); }
  void disconnect() noexcept override;
  void publish(std::string_view topic, std::string_view payload, std::uint8_t qos,
               bool retain) override;
  void subscribe(std::string_view filter) override;
  std::vector<InboundMessage> poll() override;

  const MqttOptions& options() const { return options_; }

 private:
  void send(const mqtt::Packet& packet);
  /// Reads until a packet satisfying `want` arrives; other packets are dispatched.
  mqtt::Packet await(const std::function<bool(const mqtt::Packet&)>& want);
  /// Handles unsolicited packets; returns false for ones the caller should see.
  void dispatch(const mqtt::Packet& packet);
  bool read_once(Duration timeout);
  std::uint16_t next_packet_id();
  void send_subscribe(const std::string& filter);
  [[noreturn]] void fail(const std::string& what);

  MqttOptions options_;
  net::Socket socket_;
  std::vector<std::uint8_t> rx_;
  std::vector<mqtt::Packet> parked_;
  std::vector<InboundMessage> inbox_;
  std::vector<std::string> filters_;
  std::uint16_t packet_id_ = 0;
  std::chrono::steady_clock::time_point last_tx_{};
};

/// Decorator that simulates broker outages: while `is_down()` is true every
/// operation fails with Error(Transport) and the inner session is dropped.
class FaultInjectingSession final : public BrokerSession {
 public:
  FaultInjectingSession(BrokerSession& inner, std::function<bool()> is_down)
      : inner_(inner), is_down_(std::move(is_down)) {}

  void connect() override;
  bool connected() const override { return inner_.connected(); }
  void disconnect() noexcept override { inner_.disconnect(); }
  void publish(std::string_view topic, std::string_view payload, std::uint8_t qos,
               bool retain) override;
  void subscribe(std::string_view filter) override { inner_.subscribe(filter); }
  std::vector<InboundMessage> poll() override;

 private:
  void check();
  BrokerSession& inner_;
  std::function<bool()> is_down_;
};

}  // namespace fieldpod
