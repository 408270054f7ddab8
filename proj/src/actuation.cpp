#include "fieldpod/actuation.hpp"

#include <fmt/format.h>

#include "fieldpod/error.hpp"

namespace fieldpod {

void DecisionPolicy::validate() const {
  if (!(sm_low >= 0 && sm_low < sm_high && sm_high <= 100)) {
    throw Error(ErrorCode::Configuration,
                fmt::format("pump thresholds need 0 <= sm_low < sm_high <= 100 (got {}, {})", sm_low, sm_high),
                "sm_low");
  }
}

DecisionPolicy DecisionPolicy::from_soil(const SoilProfile& soil, const CropProfile& crop) {
  DecisionPolicy p{100.0 * (soil.fc - crop.depletion_fraction * (soil.fc - soil.wp)), 100.0 * soil.fc * 0.95};
  p.validate();
  return p;
}

std::string_view to_string(PumpAction action) { return action == PumpAction::On ? "on" : "off"; }

std::string_view to_string(CommandSource source) {
  return source == CommandSource::Auto ? "auto" : "manual";
}

std::optional<PumpAction> parse_pump_payload(std::string_view payload) {
  if (payload == "on") return PumpAction::On;
  if (payload == "off") return PumpAction::Off;
  return std::nullopt;
}

ActuatorCommand ActuatorCommand::automatic(PumpAction action, UtcTime at) {
  return ActuatorCommand{Actuator::Pump, action, CommandSource::Auto, at, std::nullopt};
}

ActuatorCommand ActuatorCommand::manual(PumpAction action, UtcTime at, std::chrono::seconds ttl) {
  if (ttl <= std::chrono::seconds::zero()) {
    throw Error(ErrorCode::Validation, "manual command ttl must be positive", "ttl_s");
  }
  return ActuatorCommand{Actuator::Pump, action, CommandSource::Manual, at, ttl};
}

std::optional<ActuatorCommand> decide(const DecisionPolicy& policy, double soil_moisture,
                                      const RelayState& relay, UtcTime now) {
  if (!relay.pump_on && soil_moisture <= policy.sm_low) {
    return ActuatorCommand::automatic(PumpAction::On, now);
  }
  if (relay.pump_on && soil_moisture >= policy.sm_high) {
    return ActuatorCommand::automatic(PumpAction::Off, now);
  }
  return std::nullopt;
}

std::optional<ActuatorCommand> merge(const std::optional<ActuatorCommand>& automatic,
                                     const std::optional<ActuatorCommand>& manual, UtcTime now) {
  if (manual && !manual->expired(now)) return manual;
  return automatic;
}

RelayState apply(const RelayState& relay, const ActuatorCommand& command, UtcTime now) {
  const bool want_on = command.action == PumpAction::On;
  if (want_on == relay.pump_on) return relay;
  return RelayState{want_on, now, command.source};
}

PumpController::PumpController(DecisionPolicy policy, std::chrono::seconds sample_period, UtcTime start,
                               std::chrono::seconds manual_ttl, int stale_periods)
    : policy_(policy),
      sample_period_(sample_period),
      manual_ttl_(manual_ttl),
      stale_periods_(stale_periods),
      last_valid_sm_(start),
      relay_{false, start, CommandSource::Auto} {
  policy_.validate();
}

PumpController::Step PumpController::on_manual(PumpAction action, UtcTime now) {
  manual_ = ActuatorCommand::manual(action, now, manual_ttl_);
  const auto before = relay_;
  relay_ = apply(relay_, *manual_, now);
  return Step{manual_, !(relay_ == before)};
}

PumpController::Step PumpController::on_sample(std::optional<double> soil_moisture, UtcTime now) {
  if (manual_ && manual_->expired(now)) manual_.reset();

  std::optional<ActuatorCommand> automatic;
  if (soil_moisture) {
    last_valid_sm_ = now;
    automatic = decide(policy_, *soil_moisture, relay_, now);
  } else if (relay_.pump_on && now - last_valid_sm_ >= stale_periods_ * sample_period_) {
    automatic = ActuatorCommand::automatic(PumpAction::Off, now);
  }

  Step step;
  step.command = merge(automatic, manual_, now);
  if (automatic && step.command && step.command->source == CommandSource::Auto) {
    auto_commands_.push_back(*automatic);
  }
  if (step.command) {
    const auto before = relay_;
    relay_ = apply(relay_, *step.command, now);
    step.changed = !(relay_ == before);
  }
  return step;
}

}  // namespace fieldpod
