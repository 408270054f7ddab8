#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "fieldpod/calendar.hpp"
#include "fieldpod/sensing.hpp"

namespace fieldpod {

inline constexpr std::string_view kDefaultTopicPrefix = "/usp";
inline constexpr std::string_view kDefaultBrokerAddress = "10.4.1.100:1883";

/// MQTT topic of the form <prefix>/<leaf>.
class Topic {
 public:
  Topic() = default;
  explicit Topic(std::string value) : value_(std::move(value)) {}
  const std::string& str() const { return value_; }
  auto operator<=>(const Topic&) const = default;

 private:
  std::string value_;
};

/// Throws Error(Configuration) unless prefix starts with '/', has no trailing
/// '/', and contains none of `,` `+` `#` or control characters.
void validate_topic_prefix(std::string_view prefix);

/// Temperature -> <prefix>/temp, Humidity -> <prefix>/humid,
/// SoilMoisture -> <prefix>/sm. Inactive kinds throw Error(Validation).
Topic topic_for(SensorKind kind, std::string_view prefix);

Topic pump_command_topic(std::string_view prefix);
Topic pump_status_topic(std::string_view prefix);

/// ASCII decimal with exactly one fractional digit, half away from zero.
std::string encode_payload(const SensorReading& reading);
std::string format_one_decimal(double value);

struct TelemetryRecord {
  std::uint64_t seq{};
  Topic topic;
  std::string payload;
  UtcTime timestamp{};

  bool operator==(const TelemetryRecord&) const = default;
};

/// `seq,iso8601,topic,payload` (no trailing newline).
std::string to_line(const TelemetryRecord& record);
TelemetryRecord from_line(std::string_view line);

}  // namespace fieldpod
