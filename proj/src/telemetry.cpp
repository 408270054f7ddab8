#include "fieldpod/telemetry.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "fieldpod/error.hpp"

namespace fieldpod {

void validate_topic_prefix(std::string_view prefix) {
  if (prefix.size() < 2 || prefix.front() != '/' || prefix.back() == '/') {
    throw Error(ErrorCode::Configuration,
                fmt::format("topic prefix '{}' must start with '/' and name a level", prefix),
                "topic_prefix");
  }
  for (char c : prefix) {
    if (c == ',' || c == '+' || c == '#' || static_cast<unsigned char>(c) < 0x20) {
      throw Error(ErrorCode::Configuration,
                  fmt::format("topic prefix '{}' contains a reserved character", prefix),
                  "topic_prefix");
    }
  }
}

Topic topic_for(SensorKind kind, std::string_view prefix) {
  validate_topic_prefix(prefix);
  if (!is_active(kind)) {
    throw Error(ErrorCode::Validation,
                fmt::format("unsupported sensor kind '{}'", spec_of(kind).name), "kind");
  }
  return Topic{fmt::format("{}/{}", prefix, spec_of(kind).code)};
}

Topic pump_command_topic(std::string_view prefix) {
  validate_topic_prefix(prefix);
  return Topic{fmt::format("{}/cmd/pump", prefix)};
}

Topic pump_status_topic(std::string_view prefix) {
  validate_topic_prefix(prefix);
  return Topic{fmt::format("{}/status/pump", prefix)};
}

std::string format_one_decimal(double value) {
  const long long tenths = std::llround(value * 10.0);
  const long long mag = std::llabs(tenths);
  return fmt::format("{}{}.{}", tenths < 0 ? "-" : "", mag / 10, mag % 10);
}

std::string encode_payload(const SensorReading& reading) { return format_one_decimal(reading.value); }

std::string to_line(const TelemetryRecord& record) {
  return fmt::format("{},{},{},{}", record.seq, format_utc(record.timestamp), record.topic.str(),
                     record.payload);
}

TelemetryRecord from_line(std::string_view line) {
  const auto c1 = line.find(',');
  const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
  const auto c3 = c2 == std::string_view::npos ? c2 : line.find(',', c2 + 1);
  if (c3 == std::string_view::npos) {
    throw Error(ErrorCode::Parse, fmt::format("malformed telemetry record '{}'", line));
  }
  TelemetryRecord r;
  const auto seq = line.substr(0, c1);
  auto [ptr, ec] = std::from_chars(seq.data(), seq.data() + seq.size(), r.seq);
  if (ec != std::errc{} || ptr != seq.data() + seq.size()) {
    throw Error(ErrorCode::Parse, fmt::format("bad record seq '{}'", seq));
  }
  r.timestamp = parse_utc(line.substr(c1 + 1, c2 - c1 - 1));
  r.topic = Topic{std::string(line.substr(c2 + 1, c3 - c2 - 1))};
  r.payload = std::string(line.substr(c3 + 1));
  return r;
}

}  // namespace fieldpod
