#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fieldpod/application.hpp"
#include "fieldpod/catalog.hpp"
#include "fieldpod/clock.hpp"
#include "fieldpod/device_data.hpp"
#include "fieldpod/telemetry.hpp"

namespace fieldpod {

struct RuntimeSettings {
  double config_window_s = 120;
  double sample_period_s = 60;
  std::string broker_address{kDefaultBrokerAddress};
  std::string topic_prefix{kDefaultTopicPrefix};
  std::string device_id = "fieldpod";
  double time_scale = 1;  // simulated seconds per wall second

  /// Throws Error(Configuration) naming the offending field.
  void validate() const;
};

namespace phase {
struct ConfigMode {
  Instant deadline;
  bool operator==(const ConfigMode&) const = default;
};
struct SettingUp {
  Instant window_closed;  // the ConfigMode deadline just passed
  bool operator==(const SettingUp&) const = default;
};
struct Operational {
  std::uint64_t next_boundary = 0;  // index of the next sample boundary
  bool operator==(const Operational&) const = default;
};
struct Fault {
  std::string reason;
  bool operator==(const Fault&) const = default;
};
}  // namespace phase

using Phase = std::variant<phase::ConfigMode, phase::SettingUp, phase::Operational, phase::Fault>;

std::string_view phase_name(const Phase& phase);

/// Immutable snapshot of the device lifecycle.
struct DeviceState {
  Phase phase;
  Instant boot_time;
  double time_scale = 1;
  double sample_period_s = 60;
  std::optional<ApplicationInput> application;  // prefilled or committed input

  bool in_config_mode() const { return std::holds_alternative<phase::ConfigMode>(phase); }
  bool operational() const { return std::holds_alternative<phase::Operational>(phase); }
  bool faulted() const { return std::holds_alternative<phase::Fault>(phase); }

  /// Simulated seconds since boot.
  double sim_seconds(Instant now) const;
  /// Wall instant of sample boundary k (k * sample_period simulated seconds after boot).
  Instant boundary_instant(std::uint64_t k) const;
  /// Latest boundary index whose instant is <= now.
  std::uint64_t boundary_at(Instant now) const;
};

namespace effect {
struct DisablePortalConfig {
  bool operator==(const DisablePortalConfig&) const = default;
};
struct RunOneTimeSetup {
  bool inputs_committed = false;
  bool operator==(const RunOneTimeSetup&) const = default;
};
struct SampleSensors {
  std::uint64_t boundary = 0;
  double sim_time = 0;  // boundary * sample_period
  bool operator==(const SampleSensors&) const = default;
};
}  // namespace effect

using Effect = std::variant<effect::DisablePortalConfig, effect::RunOneTimeSetup, effect::SampleSensors>;

struct TickResult {
  DeviceState state;
  std::vector<Effect> effects;
};

/// Enters ConfigMode with deadline = now + config_window / time_scale. When a
/// store is given, a previously persisted application input is loaded into
/// the state as a prefill.
DeviceState boot(const RuntimeSettings& settings, Instant now, const DeviceDataStore* store = nullptr);

/// Advances the lifecycle. Effects are descriptions; the caller executes them.
TickResult tick(const DeviceState& state, Instant now, bool inputs_committed);

/// Validates and persists the input. Throws Error(ModeViolation) outside
/// ConfigMode, Error(Validation) naming the field for unknown crop/soil.
DeviceState commit_application(const DeviceState& state, const ApplicationInput& input,
                               const Catalog& catalog, DeviceDataStore& store);

DeviceState enter_fault(const DeviceState& state, std::string reason);

}  // namespace fieldpod
