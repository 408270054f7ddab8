#include "fieldpod/broker_session.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fieldpod/error.hpp"

namespace fieldpod {

MqttSession::MqttSession(MqttOptions options) : options_(std::move(options)) {}

void MqttSession::fail(const std::string& what) {
  socket_.reset();
  rx_.clear();
  parked_.clear();
  throw Error(ErrorCode::Transport, what);
}

void MqttSession::connect() {
  if (connected()) return;
  rx_.clear();
  parked_.clear();
  socket_ = net::connect_tcp(options_.address, options_.connect_timeout);
  try {
    send(mqtt::Connect{options_.client_id, options_.keepalive_s, true});
    const auto ack = await([](const mqtt::Packet& p) { return std::holds_alternative<mqtt::Connack>(p); });
    const auto rc = std::get<mqtt::Connack>(ack).return_code;
    if (rc != 0) fail(fmt::format("broker refused connection (CONNACK {})", rc));
    for (const auto& f : filters_) send_subscribe(f);
  } catch (...) {
    socket_.reset();
    throw;
  }
  spdlog::info("mqtt: connected to {} as '{}'", options_.address.str(), options_.client_id);
}

void MqttSession::disconnect() noexcept {
  if (!socket_.valid()) return;
  try {
    const auto bytes = mqtt::encode(mqtt::Disconnect{});
    net::send_all(socket_, bytes, std::chrono::milliseconds{200});
  } catch (...) {
  }
  socket_.reset();
  rx_.clear();
}

void MqttSession::send(const mqtt::Packet& packet) {
  if (!socket_.valid()) throw Error(ErrorCode::Transport, "not connected");
  const auto bytes = mqtt::encode(packet);
  try {
    net::send_all(socket_, bytes, options_.io_timeout);
  } catch (const Error& e) {
    fail(e.what());
  }
  last_tx_ = std::chrono::steady_clock::now();
}

bool MqttSession::read_once(Duration timeout) {
  std::array<std::uint8_t, 4096> buf;
  std::size_t n = 0;
  try {
    n = net::recv_some(socket_, buf, timeout);
  } catch (const Error& e) {
    fail(e.what());
  }
  if (n == 0) return false;
  rx_.insert(rx_.end(), buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(n));
  while (true) {
    std::optional<mqtt::Decoded> d;
    try {
      d = mqtt::decode(rx_);
    } catch (const Error& e) {
      fail(fmt::format("malformed packet from broker: {}", e.what()));
    }
    if (!d) break;
    rx_.erase(rx_.begin(), rx_.begin() + static_cast<std::ptrdiff_t>(d->consumed));
    parked_.push_back(std::move(d->packet));
  }
  return true;
}

void MqttSession::dispatch(const mqtt::Packet& packet) {
  if (const auto* p = std::get_if<mqtt::Publish>(&packet)) {
    inbox_.push_back({p->topic, p->payload, p->retain});
    if (p->qos == 1) send(mqtt::Puback{p->packet_id});
  }
  // PINGRESP, stray acks: nothing to do
}

mqtt::Packet MqttSession::await(const std::function<bool(const mqtt::Packet&)>& want) {
  const auto deadline = std::chrono::steady_clock::now() + options_.io_timeout;
  while (true) {
    for (auto it = parked_.begin(); it != parked_.end();) {
      if (want(*it)) {
        auto p = std::move(*it);
        parked_.erase(it);
        return p;
      }
      auto other = std::move(*it);
      it = parked_.erase(it);
      dispatch(other);
    }
    const auto left = deadline - std::chrono::steady_clock::now();
    if (left <= Duration::zero()) fail("timed out waiting for broker response");
    read_once(left);
  }
}

std::uint16_t MqttSession::next_packet_id() {
  if (++packet_id_ == 0) packet_id_ = 1;
  return packet_id_;
}

void MqttSession::publish(std::string_view topic, std::string_view payload, std::uint8_t qos,
                          bool retain) {
  if (!connected()) throw Error(ErrorCode::Transport, "not connected");
  mqtt::Publish p{std::string(topic), std::string(payload), qos, retain, false, 0};
  if (qos > 0) p.packet_id = next_packet_id();
  send(p);
  if (qos == 0) return;
  const auto id = p.packet_id;
  await([id](const mqtt::Packet& pk) {
    const auto* a = std::get_if<mqtt::Puback>(&pk);
    return a && a->packet_id == id;
  });
}

void MqttSession::send_subscribe(const std::string& filter) {
  const auto id = next_packet_id();
  send(mqtt::Subscribe{id, {{filter, 1}}});
  const auto ack = await([id](const mqtt::Packet& pk) {
    const auto* a = std::get_if<mqtt::Suback>(&pk);
    return a && a->packet_id == id;
  });
  const auto& codes = std::get<mqtt::Suback>(ack).return_codes;
  if (codes.empty() || codes.front() == 0x80) {
    spdlog::warn("mqtt: broker rejected subscription to '{}'", filter);
  }
}

void MqttSession::subscribe(std::string_view filter) {
  const std::string f(filter);
  if (std::find(filters_.begin(), filters_.end(), f) == filters_.end()) filters_.push_back(f);
  if (connected()) send_subscribe(f);
}

std::vector<InboundMessage> MqttSession::poll() {
  if (connected()) {
    while (read_once(Duration::zero())) {
    }
    auto pending = std::move(parked_);
    parked_.clear();
    for (const auto& p : pending) dispatch(p);
    const auto idle = std::chrono::steady_clock::now() - last_tx_;
    if (options_.keepalive_s > 0 && idle > std::chrono::seconds{options_.keepalive_s} / 2) {
      send(mqtt::Pingreq{});
    }
  }
  return std::exchange(inbox_, {});
}

void FaultInjectingSession::check() {
  if (is_down_()) {
    inner_.disconnect();
    throw Error(ErrorCode::Transport, "broker unreachable (scripted outage)");
  }
}

void FaultInjectingSession::connect() {
  check();
  inner_.connect();
}

void FaultInjectingSession::publish(std::string_view topic, std::string_view payload,
                                   std::uint8_t qos, bool retain) {
  check();
  inner_.publish(topic, payload, qos, retain);
}

std::vector<InboundMessage> FaultInjectingSession::poll() {
  if (is_down_()) {
    inner_.disconnect();
    return {};
  }
  return inner_.poll();
}

}  // namespace fieldpod
