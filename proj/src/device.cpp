#include "fieldpod/device.hpp"

#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fieldpod/error.hpp"
#include "fieldpod/net.hpp"

namespace fieldpod {

void RuntimeSettings::validate() const {
  auto positive = [](double v, const char* field) {
    if (!(v > 0) || !std::isfinite(v)) {
      throw Error(ErrorCode::Configuration, fmt::format("{} must be a positive number, got {}", field, v), field);
    }
  };
  positive(config_window_s, "config_window");
  positive(sample_period_s, "sample_period");
  positive(time_scale, "time_scale");
  try {
    validate_topic_prefix(topic_prefix);
  } catch (const Error& e) {
    throw Error(ErrorCode::Configuration, e.what(), "topic_prefix");
  }
  if (device_id.empty()) throw Error(ErrorCode::Configuration, "device_id must not be empty", "device_id");
  net::HostPort::parse(broker_address, "broker_address");
}

std::string_view phase_name(const Phase& phase) {
  static constexpr std::string_view names[] = {"config_mode", "setting_up", "operational", "fault"};
  return names[phase.index()];
}

double DeviceState::sim_seconds(Instant now) const { return to_seconds(now - boot_time) * time_scale; }

Instant DeviceState::boundary_instant(std::uint64_t k) const {
  return boot_time + seconds_f(static_cast<double>(k) * sample_period_s / time_scale);
}

std::uint64_t DeviceState::boundary_at(Instant now) const {
  if (now < boot_time) return 0;
  auto k = static_cast<std::uint64_t>(std::floor(sim_seconds(now) / sample_period_s));
  // Float rounding can land one boundary off in either direction.
  while (k > 0 && boundary_instant(k) > now) --k;
  while (boundary_instant(k + 1) <= now) ++k;
  return k;
}

DeviceState boot(const RuntimeSettings& settings, Instant now, const DeviceDataStore* store) {
  settings.validate();
  DeviceState state{phase::ConfigMode{now + seconds_f(settings.config_window_s / settings.time_scale)}, now,
                    settings.time_scale, settings.sample_period_s, std::nullopt};
  if (store) {
    auto data = store->load();
    if (data.application) {
      spdlog::info("prefilling application input from {}", store->path().string());
      state.application = data.application;
    }
  }
  return state;
}

TickResult tick(const DeviceState& state, Instant now, bool inputs_committed) {
  TickResult out{state, {}};
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, phase::ConfigMode>) {
          if (now >= p.deadline) {
            out.state.phase = phase::SettingUp{p.deadline};
            out.effects.emplace_back(effect::DisablePortalConfig{});
          }
        } else if constexpr (std::is_same_v<P, phase::SettingUp>) {
          // Sampling starts at the first boundary not before the window closed.
          std::uint64_t next = state.boundary_at(p.window_closed);
          if (state.boundary_instant(next) < p.window_closed) ++next;
          out.state.phase = phase::Operational{next};
          out.effects.emplace_back(effect::RunOneTimeSetup{inputs_committed});
        } else if constexpr (std::is_same_v<P, phase::Operational>) {
          if (now >= state.boundary_instant(p.next_boundary)) {
            const std::uint64_t k = state.boundary_at(now);
            if (k > p.next_boundary) {
              spdlog::debug("skipping {} missed sample boundaries", k - p.next_boundary);
            }
            out.state.phase = phase::Operational{k + 1};
            out.effects.emplace_back(effect::SampleSensors{k, static_cast<double>(k) * state.sample_period_s});
          }
        }
      },
      state.phase);
  return out;
}

DeviceState commit_application(const DeviceState& state, const ApplicationInput& input, const Catalog& catalog,
                               DeviceDataStore& store) {
  if (!state.in_config_mode()) {
    throw Error(ErrorCode::ModeViolation,
                fmt::format("configuration window closed (phase {})", phase_name(state.phase)));
  }
  catalog.validate(input);
  store.save_application(input);
  DeviceState next = state;
  next.application = input;
  return next;
}

DeviceState enter_fault(const DeviceState& state, std::string reason) {
  DeviceState next = state;
  if (!next.faulted()) {
    spdlog::error("device fault: {}", reason);
    next.phase = phase::Fault{std::move(reason)};
  }
  return next;
}

}  // namespace fieldpod
