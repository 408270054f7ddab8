#pragma once

#include <chrono>
#include <optional>
#include <string_view>
#include <vector>

#include "fieldpod/calendar.hpp"
#include "fieldpod/irrigation.hpp"

namespace fieldpod {

/// Hysteresis band on soil moisture (%VWC): pump turns on at or below
/// sm_low and off at or above sm_high.
struct DecisionPolicy {
  double sm_low = 20;
  double sm_high = 35;

  /// Throws Error(Configuration) unless 0 <= sm_low < sm_high <= 100.
  void validate() const;

  /// sm_low at the RAW depletion point, sm_high at 95 % of field capacity.
  static DecisionPolicy from_soil(const SoilProfile& soil, const CropProfile& crop);
};

enum class Actuator { Pump };
enum class PumpAction { On, Off };
enum class CommandSource { Auto, Manual };

std::string_view to_string(PumpAction action);
std::string_view to_string(CommandSource source);
/// "on" / "off" (exact, ASCII). Anything else yields nullopt.
std::optional<PumpAction> parse_pump_payload(std::string_view payload);

inline constexpr std::chrono::seconds kDefaultManualTtl{1800};

struct ActuatorCommand {
  Actuator target = Actuator::Pump;
  PumpAction action = PumpAction::Off;
  CommandSource source = CommandSource::Auto;
  UtcTime timestamp{};
  std::optional<std::chrono::seconds> ttl;  // Manual only

  static ActuatorCommand automatic(PumpAction action, UtcTime at);
  /// Throws Error(Validation) for a non-positive ttl.
  static ActuatorCommand manual(PumpAction action, UtcTime at, std::chrono::seconds ttl = kDefaultManualTtl);

  bool expired(UtcTime now) const { return ttl && now >= timestamp + *ttl; }
  bool operator==(const ActuatorCommand&) const = default;
};

struct RelayState {
  bool pump_on = false;
  UtcTime since{};
  CommandSource last_source = CommandSource::Auto;

  bool operator==(const RelayState&) const = default;
};

std::optional<ActuatorCommand> decide(const DecisionPolicy& policy, double soil_moisture,
                                      const RelayState& relay, UtcTime now);

/// An unexpired manual command wins over the automatic one.
std::optional<ActuatorCommand> merge(const std::optional<ActuatorCommand>& automatic,
                                     const std::optional<ActuatorCommand>& manual, UtcTime now);

/// Changes the relay only when the action differs from its current state.
RelayState apply(const RelayState& relay, const ActuatorCommand& command, UtcTime now);

/// Per-sample pump logic owned by the control loop: hysteresis, manual
/// override with expiry, and the stale-sensor guard.
class PumpController {
 public:
  struct Step {
    std::optional<ActuatorCommand> command;  // what reached apply()
    bool changed = false;
  };

  PumpController(DecisionPolicy policy, std::chrono::seconds sample_period, UtcTime start,
                 std::chrono::seconds manual_ttl = kDefaultManualTtl, int stale_periods = 3);

  /// Takes effect immediately and holds until its TTL expires.
  Step on_manual(PumpAction action, UtcTime now);
  /// `soil_moisture` is the latest reading that passed validation, if the
  /// current sample had one.
  Step on_sample(std::optional<double> soil_moisture, UtcTime now);

  const RelayState& relay() const { return relay_; }
  const DecisionPolicy& policy() const { return policy_; }
  const std::optional<ActuatorCommand>& manual() const { return manual_; }
  /// Automatic commands produced by decide or the stale guard, in order.
  const std::vector<ActuatorCommand>& auto_commands() const { return auto_commands_; }

 private:
  DecisionPolicy policy_;
  std::chrono::seconds sample_period_;
  std::chrono::seconds manual_ttl_;
  int stale_periods_;
  UtcTime last_valid_sm_;
  RelayState relay_;
  std::optional<ActuatorCommand> manual_;
  std::vector<ActuatorCommand> auto_commands_;
};

}  // namespace fieldpod
