#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

// Minimal MQTT 3.1.1 wire codec: the subset a telemetry device and a test
// broker need (no will, no auth, no QoS 2).
namespace fieldpod::mqtt {

using Bytes = std::vector<std::uint8_t>;

enum class PacketType : std::uint8_t {
  Connect = 1,
  Connack = 2,
  Publish = 3,
  Puback = 4,
  Subscribe = 8,
  Suback = 9,
  Pingreq = 12,
  Pingresp = 13,
  Disconnect = 14,
};

struct Connect {
  std::string client_id;
  std::uint16_t keepalive_s = 60;
  bool clean_session = true;
  bool operator==(const Connect&) const = default;
};

struct Connack {
  bool session_present = false;
  std::uint8_t return_code = 0;
  bool operator==(const Connack&) const = default;
};

struct Publish {
  std::string topic;
  std::string payload;
  std::uint8_t qos = 0;
  bool retain = false;
  bool dup = false;
  std::uint16_t packet_id = 0;  // only meaningful for qos > 0
  bool operator==(const Publish&) const = default;
};

struct Puback {
  std::uint16_t packet_id = 0;
  bool operator==(const Puback&) const = default;
};

struct Subscribe {
  std::uint16_t packet_id = 0;
  std::vector<std::pair<std::string, std::uint8_t>> filters;
  bool operator==(const Subscribe&) const = default;
};

struct Suback {
  std::uint16_t packet_id = 0;
  std::vector<std::uint8_t> return_codes;
  bool operator==(const Suback&) const = default;
};

struct Pingreq {
  bool operator==(const Pingreq&) const = default;
};
struct Pingresp {
  bool operator==(const Pingresp&) const = default;
};
struct Disconnect {
  bool operator==(const Disconnect&) const = default;
};

using Packet =
    std::variant<Connect, Connack, Publish, Puback, Subscribe, Suback, Pingreq, Pingresp, Disconnect>;

Bytes encode(const Packet& packet);

struct Decoded {
  Packet packet;
  std::size_t consumed;
};

/// Decodes one packet from the front of `buffer`. Returns nullopt when more
/// bytes are needed; throws Error(Parse) on a malformed or unsupported packet.
std::optional<Decoded> decode(std::span<const std::uint8_t> buffer);

/// MQTT topic filter matching with `+` and `#` wildcards.
bool topic_matches(std::string_view filter, std::string_view topic);

}  // namespace fieldpod::mqtt
