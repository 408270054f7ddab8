// fieldpod: run the device against a scenario, print irrigation plans, or
// host a local test broker.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fieldpod/catalog.hpp"
#include "fieldpod/error.hpp"
#include "fieldpod/irrigation.hpp"
#include "fieldpod/runner.hpp"
#include "fieldpod/scenario.hpp"
#include "fieldpod/stub_broker.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitFault = 1;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct RunFlags {
  std::string scenario;
  std::optional<std::string> broker;
  std::optional<double> config_window;
  std::optional<double> time_scale;
  std::optional<double> duration;
  std::string data_dir = "fieldpod-data";
  int port = fieldpod::PortalServer::kDefaultPort;
  std::optional<std::string> web_root;
};

struct PlanFlags {
  std::string crop, soil, plant_date, weather;
  double area = 0, flow = 0, latitude = 0, efficiency = 0.9;
  std::optional<std::string> data_dir;
};

int run_device(const RunFlags& flags) {
  using namespace fieldpod;
  auto scenario = load_scenario(flags.scenario);
  auto& s = scenario.settings;
  if (flags.broker) s.broker_address = *flags.broker;
  if (flags.config_window) s.config_window_s = *flags.config_window;
  if (flags.time_scale) s.time_scale = *flags.time_scale;
  if (flags.duration) scenario.duration_s = *flags.duration;
  s.validate();

  RunnerOptions options;
  options.scenario = std::move(scenario);
  options.data_dir = flags.data_dir;
  if (flags.port >= 0) options.portal_port = flags.port;
  if (flags.web_root) options.web_root = *flags.web_root;

  SteadyClock clock;
  DeviceRunner runner(std::move(options), clock);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::jthread watcher([&runner](std::stop_token st) {
    while (!st.stop_requested()) {
      if (g_interrupted) {
        runner.request_stop();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  });
  const auto report = runner.run();
  spdlog::info("finished in phase {}: {} samples, {} live, {} backlogged, {} drained, {} left in backlog",
               report.final_phase, report.samples, report.published_live, report.backlogged, report.drained,
               report.backlog_left);
  if (report.fault_reason) {
    spdlog::error("device fault: {}", *report.fault_reason);
    return kExitFault;
  }
  return 0;
}

int print_plan(const PlanFlags& flags) {
  using namespace fieldpod;
  const auto catalog = flags.data_dir ? Catalog::load_or_seed(*flags.data_dir) : Catalog::seeded();
  const ApplicationInput input{flags.crop, flags.soil, Date::parse(flags.plant_date), flags.area, flags.flow};
  catalog.validate(input);
  const auto weather = load_weather_csv(flags.weather);
  const auto plan = simulate_balance(input, catalog.crop(flags.crop), catalog.soil(flags.soil), weather,
                                     flags.latitude * std::numbers::pi / 180.0, flags.efficiency);
  std::cout << stage_table_csv(plan.stage_plan) << '\n' << event_table_csv(plan.events);
  return 0;
}

int host_broker(int port) {
  fieldpod::StubBroker broker(static_cast<std::uint16_t>(port));
  spdlog::info("test broker listening on 127.0.0.1:{}", broker.port());
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::size_t shown = 0;
  while (!g_interrupted) {
    const auto log = broker.log();
    for (; shown < log.size(); ++shown) {
      const auto& p = log[shown];
      std::printf("%s %s %s%s\n", p.client_id.c_str(), p.topic.c_str(), p.payload.c_str(),
                  p.retain ? " (retained)" : "");
    }
    std::fflush(stdout);
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fieldpod irrigation node"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  RunFlags run;
  auto* run_cmd = app.add_subcommand("run", "Boot the device and run a scenario");
  run_cmd->add_option("--scenario", run.scenario, "Scenario file")->required();
  run_cmd->add_option("--broker", run.broker, "MQTT broker host:port");
  run_cmd->add_option("--config-window", run.config_window, "Config window length in simulated seconds");
  run_cmd->add_option("--time-scale", run.time_scale, "Simulated seconds per wall second");
  run_cmd->add_option("--duration", run.duration, "Stop after this many simulated seconds");
  run_cmd->add_option("--data-dir", run.data_dir, "Device data directory")->envname("FIELDPOD_DATA_DIR");
  run_cmd->add_option("--port", run.port, "Portal HTTP port (-1 disables the portal)");
  run_cmd->add_option("--web-root", run.web_root, "Directory with the web UI build")->check(CLI::ExistingDirectory);

  PlanFlags plan;
  auto* plan_cmd = app.add_subcommand("plan", "Print the growth-stage and irrigation tables");
  plan_cmd->add_option("--crop", plan.crop)->required();
  plan_cmd->add_option("--soil", plan.soil)->required();
  plan_cmd->add_option("--plant-date", plan.plant_date, "YYYY-MM-DD")->required();
  plan_cmd->add_option("--area", plan.area, "Irrigated area in m2")->required();
  plan_cmd->add_option("--flow", plan.flow, "Pump flow in L/h")->required();
  plan_cmd->add_option("--weather", plan.weather, "CSV with date,tmin_c,tmax_c,rain_mm")->required();
  plan_cmd->add_option("--latitude", plan.latitude, "Site latitude in degrees")->required();
  plan_cmd->add_option("--efficiency", plan.efficiency, "Application efficiency")->capture_default_str();
  plan_cmd->add_option("--data-dir", plan.data_dir, "Directory holding a catalog.json override")
      ->envname("FIELDPOD_DATA_DIR");

  int broker_port = 1883;
  auto* broker_cmd = app.add_subcommand("broker", "Run the local test broker and print what it receives");
  broker_cmd->add_option("--port", broker_port)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("fieldpod"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*run_cmd) return run_device(run);
    if (*plan_cmd) return print_plan(plan);
    return host_broker(broker_port);
  } catch (const fieldpod::Error& e) {
    const bool usage = e.code() != fieldpod::ErrorCode::Storage && e.code() != fieldpod::ErrorCode::Transport;
    std::fprintf(stderr, "fieldpod: %s: %s%s%s\n", std::string(fieldpod::to_string(e.code())).c_str(), e.what(),
                 e.field().empty() ? "" : " [", e.field().empty() ? "" : (e.field() + "]").c_str());
    return usage ? kExitUsage : kExitFault;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fieldpod: %s\n", e.what());
    return kExitFault;
  }
}
