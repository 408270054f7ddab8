#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fieldpod/actuation.hpp"
#include "fieldpod/backlog.hpp"
#include "fieldpod/broker_session.hpp"
#include "fieldpod/catalog.hpp"
#include "fieldpod/clock.hpp"
#include "fieldpod/control_queue.hpp"
#include "fieldpod/device.hpp"
#include "fieldpod/device_data.hpp"
#include "fieldpod/event_hub.hpp"
#include "fieldpod/irrigation.hpp"
#include "fieldpod/portal.hpp"
#include "fieldpod/portal_server.hpp"
#include "fieldpod/publisher.hpp"
#include "fieldpod/scenario.hpp"
#include "fieldpod/sensing.hpp"

namespace fieldpod {

struct RunnerOptions {
  Scenario scenario;
  std::filesystem::path data_dir;
  /// No HTTP server when unset; 0 picks a free port.
  std::optional<int> portal_port;
  std::string portal_host = "0.0.0.0";
  std::optional<std::filesystem::path> web_root;
  /// Stop after this many SampleSensors effects.
  std::optional<std::uint64_t> max_samples;
};

struct RunReport {
  int exit_code = 0;  // 0 clean, 1 fault
  std::string final_phase;
  std::optional<std::string> fault_reason;
  std::uint64_t samples = 0;
  std::uint64_t portal_disabled = 0;  // DisablePortalConfig effects seen
  std::uint64_t setups = 0;           // RunOneTimeSetup effects seen
  std::size_t published_live = 0;
  std::size_t drained = 0;
  std::size_t backlogged = 0;
  std::size_t backlog_left = 0;
};

/// The device control loop: ticks the lifecycle, executes effects, and is
/// the only thread touching device state. Portal handlers reach it through
/// queue().
class DeviceRunner final : public PortalHost {
 public:
  static constexpr std::string_view kStageCsv = "plan_stages.csv";
  static constexpr std::string_view kEventCsv = "plan_events.csv";

  DeviceRunner(RunnerOptions options, const Clock& clock);
  ~DeviceRunner() override;

  /// Blocks until the scenario duration elapses, max_samples is reached,
  /// request_stop() is called, or the device faults.
  RunReport run();
  void request_stop() { stop_requested_ = true; }

  /// Bound portal port once the server is up, else 0.
  int portal_port() const { return portal_port_.load(); }
  /// Instant of boot() once the loop started.
  std::optional<Instant> boot_time() const;

  ControlQueue& queue() { return queue_; }
  EventHub& hub() { return hub_; }

  /// Every telemetry record generated, in seq order.
  std::vector<TelemetryRecord> journal() const;
  /// Pump status changes published, in order ("on"/"off").
  std::vector<std::string> pump_history() const;

  // PortalHost, control-loop thread only.
  ConfigPortal& portal() override { return *portal_; }
  StateSnapshot snapshot() override;
  void apply_network(const NetworkConfig& config) override;
  void submit_application(const ApplicationInput& input) override;
  RelayState manual_pump(PumpAction action) override;

 private:
  void advance(Instant now);
  void execute(const Effect& effect, Instant now);
  void one_time_setup(bool inputs_committed, Instant now);
  void sample_sensors(const effect::SampleSensors& s);
  void service_inbound(UtcTime now);
  void publish_pump_status();
  void build_plan();
  void replan(const SensorReading& sm);
  void write_plan_files();
  void fault(const std::string& reason);
  UtcTime sim_utc(Instant now) const;
  UtcTime sim_utc_at(double sim_s) const;
  Instant next_due(Instant now) const;
  bool done(Instant now) const;

  RunnerOptions options_;
  const Clock& clock_;
  Catalog catalog_;
  DeviceDataStore data_store_;
  std::unique_ptr<ConfigPortal> portal_;
  ControlQueue queue_;
  EventHub hub_;
  std::unique_ptr<PortalServer> server_;
  std::atomic<int> portal_port_{0};
  std::atomic<bool> stop_requested_{false};

  DeviceState state_;
  bool started_ = false;
  bool committed_ = false;
  double current_sim_ = 0;
  ScenarioStream stream_;  // replay mode
  std::optional<SimulatedFeed> feed_;  // simulated mode

  std::unique_ptr<BacklogStore> backlog_;
  std::unique_ptr<MqttSession> mqtt_;
  std::unique_ptr<FaultInjectingSession> session_;
  std::unique_ptr<TelemetryPublisher> publisher_;
  std::unique_ptr<PumpController> pump_;
  bool status_dirty_ = false;

  std::optional<IrrigationPlan> plan_;
  std::vector<WeatherDay> weather_;
  ObservedTemperatures observed_;
  std::optional<Date> last_replan_;
  std::map<std::string, StreamEvent> latest_;

  RunReport report_;
  mutable std::mutex journal_mu_;
  std::vector<TelemetryRecord> journal_;
  std::vector<std::string> pump_history_;
  std::optional<Instant> boot_time_;
};

}  // namespace fieldpod
