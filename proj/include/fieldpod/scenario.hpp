#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fieldpod/actuation.hpp"
#include "fieldpod/application.hpp"
#include "fieldpod/calendar.hpp"
#include "fieldpod/device.hpp"
#include "fieldpod/portal.hpp"

namespace fieldpod {

/// Minimal TOML-style document: [table] and [[array]] headers, key = value
/// lines with string, number or boolean values, and # comments.
namespace kv {

using Value = std::variant<std::string, double, bool>;

struct Table {
  std::map<std::string, Value, std::less<>> values;
  std::size_t line = 0;  // header line, 0 for the root table
};

struct Document {
  Table root;
  std::map<std::string, Table, std::less<>> tables;
  std::map<std::string, std::vector<Table>, std::less<>> arrays;
};

/// Throws Error(Parse) with the line number on malformed input.
Document parse(std::string_view text);

}  // namespace kv

struct BrokerFault {
  double down_from_s = 0;  // simulated seconds since boot, inclusive
  double down_until_s = 0;  // exclusive

  bool contains(double sim_s) const { return sim_s >= down_from_s && sim_s < down_until_s; }
  bool operator==(const BrokerFault&) const = default;
};

struct SiteSettings {
  double latitude_deg = 0;
  std::filesystem::path weather_csv;
  double efficiency = 0.9;
};

enum class SensorMode { Simulated, Replay };

struct Scenario {
  RuntimeSettings settings;
  std::optional<double> duration_s;
  UtcTime start_utc{};
  double manual_ttl_s = 1800;

  SensorMode sensor_mode = SensorMode::Simulated;
  std::uint64_t seed = 1;
  std::filesystem::path replay_csv;

  std::vector<NetworkInfo> networks;
  std::vector<BrokerFault> broker_faults;  // sorted, non-overlapping
  std::optional<double> storage_fail_after_s;
  std::optional<DecisionPolicy> policy;
  /// Entered on the portal at boot, as if by the user.
  std::optional<ApplicationInput> application;
  std::optional<SiteSettings> site;

  bool broker_down_at(double sim_s) const;
};

/// Relative file references resolve against `base_dir`. Throws
/// Error(Configuration) naming the key for invalid or unknown entries and
/// Error(NotFound) for referenced files that do not exist.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace fieldpod
