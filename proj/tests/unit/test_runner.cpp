#include <gtest/gtest.h>
#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <future>
#include <json.hpp>
#include <set>

#include "fieldpod/runner.hpp"
#include "fieldpod/stub_broker.hpp"
#include "temp_dir.hpp"

namespace fp = fieldpod;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

const std::filesystem::path kScenarios = std::filesystem::path(FIELDPOD_SOURCE_DIR) / "scenarios";

// Replay trace with constant readings inside the hysteresis band, so only
// manual commands move the pump.
std::filesystem::path steady_trace(const testing_support::TempDir& dir) {
  const auto path = dir / "steady.csv";
  std::ofstream(path) << "offset_s,kind,value\n0,temp,22.0\n0,humid,55.0\n0,sm,28.0\n";
  return path;
}

fp::Scenario steady_scenario(const testing_support::TempDir& dir, const fp::StubBroker& broker) {
  fp::Scenario sc;
  sc.settings.config_window_s = 10;
  sc.settings.sample_period_s = 60;
  sc.settings.time_scale = 600;
  sc.settings.broker_address = "127.0.0.1:" + std::to_string(broker.port());
  sc.sensor_mode = fp::SensorMode::Replay;
  sc.replay_csv = steady_trace(dir);
  sc.policy = fp::DecisionPolicy{20, 35};
  return sc;
}

bool one_decimal(const std::string& s) {
  const auto dot = s.find('.');
  return dot != std::string::npos && dot + 2 == s.size() && dot > 0;
}

}  // namespace

TEST(Runner, TopicContract) {
  fp::StubBroker broker;
  testing_support::TempDir dir;
  auto sc = fp::load_scenario(kScenarios / "replay.toml");
  sc.settings.broker_address = "127.0.0.1:" + std::to_string(broker.port());
  fp::SteadyClock clock;
  fp::DeviceRunner runner({sc, dir.path()}, clock);
  const auto report = runner.run();
  EXPECT_EQ(report.exit_code, 0);
  EXPECT_EQ(report.setups, 1u);
  EXPECT_GT(report.samples, 0u);

  std::set<std::string> seen;
  for (const auto& p : broker.log()) {
    if (p.topic == "/usp/status/pump") {
      EXPECT_TRUE(p.retain);
      EXPECT_TRUE(p.payload == "on" || p.payload == "off") << p.payload;
      continue;
    }
    seen.insert(p.topic);
    EXPECT_EQ(p.qos, 1) << p.topic;
    EXPECT_FALSE(p.retain) << p.topic;
    EXPECT_TRUE(one_decimal(p.payload)) << p.payload;
  }
  EXPECT_EQ(seen, (std::set<std::string>{"/usp/temp", "/usp/humid", "/usp/sm"}));
  EXPECT_TRUE(broker.retained("/usp/status/pump").has_value());
  // The replay dips below 20 % and climbs past 35 %.
  EXPECT_EQ(runner.pump_history(), (std::vector<std::string>{"off", "on", "off"}));
  EXPECT_TRUE(std::filesystem::exists(dir / "telemetry.backlog"));
}

TEST(Runner, CustomPrefixUsedForAllTopics) {
  fp::StubBroker broker;
  testing_support::TempDir dir;
  auto sc = steady_scenario(dir, broker);
  sc.settings.topic_prefix = "/farm/bed1";
  fp::SteadyClock clock;
  fp::DeviceRunner runner({sc, dir.path(), std::nullopt, "0.0.0.0", std::nullopt, 3}, clock);
  EXPECT_EQ(runner.run().samples, 3u);
  for (const auto& p : broker.log()) EXPECT_EQ(p.topic.rfind("/farm/bed1/", 0), 0u) << p.topic;
  EXPECT_EQ(broker.retained("/farm/bed1/status/pump"), "off");
}

TEST(Runner, ManualCommandOverMqtt) {
  fp::StubBroker broker;
  testing_support::TempDir dir;
  auto sc = steady_scenario(dir, broker);
  sc.duration_s = 1e9;
  fp::SteadyClock clock;
  fp::DeviceRunner runner({sc, dir.path()}, clock);
  auto done = std::async(std::launch::async, [&] { return runner.run(); });

  ASSERT_TRUE(broker.wait_for(
      [](const auto& log) {
        return std::any_of(log.begin(), log.end(), [](const auto& p) { return p.topic == "/usp/status/pump"; });
      },
      10s));
  broker.inject("/usp/cmd/pump", "on");
  ASSERT_TRUE(broker.wait_for(
      [](const auto& log) {
        return std::any_of(log.begin(), log.end(),
                           [](const auto& p) { return p.topic == "/usp/status/pump" && p.payload == "on"; });
      },
      10s));
  EXPECT_EQ(broker.retained("/usp/status/pump"), "on");
  broker.inject("/usp/cmd/pump", "bogus");
  broker.inject("/usp/cmd/pump", "off");
  ASSERT_TRUE(broker.wait_for(
      [](const auto& log) {
        std::vector<std::string> status;
        for (const auto& p : log) {
          if (p.topic == "/usp/status/pump") status.push_back(p.payload);
        }
        return !status.empty() && status.back() == "off" && std::count(status.begin(), status.end(), "on") > 0;
      },
      10s));
  EXPECT_EQ(broker.retained("/usp/status/pump"), "off");
  runner.request_stop();
  const auto report = done.get();
  EXPECT_EQ(report.exit_code, 0);
  EXPECT_EQ(runner.pump_history(), (std::vector<std::string>{"off", "on", "off"}));
}

TEST(Runner, StorageFaultExitsNonZero) {
  testing_support::TempDir dir;
  auto sc = fp::load_scenario(kScenarios / "storage-fault.toml");
  fp::StubBroker broker;
  sc.settings.broker_address = "127.0.0.1:" + std::to_string(broker.port());
  fp::SteadyClock clock;
  fp::DeviceRunner runner({sc, dir.path()}, clock);
  const auto report = runner.run();
  EXPECT_EQ(report.exit_code, 1);
  EXPECT_EQ(report.final_phase, "fault");
  ASSERT_TRUE(report.fault_reason.has_value());
  EXPECT_GT(report.backlogged, 0u);
}

TEST(Runner, ConfigWindowOverHttp) {
  fp::StubBroker broker;
  testing_support::TempDir dir;
  auto sc = steady_scenario(dir, broker);
  sc.settings.config_window_s = 120;
  sc.settings.time_scale = 60;
  sc.duration_s = 1e9;
  sc.site = fp::SiteSettings{14.3, kScenarios / "weather-2021.csv", 0.9};
  fp::SteadyClock clock;
  fp::DeviceRunner runner({sc, dir.path(), 0, "127.0.0.1"}, clock);
  auto done = std::async(std::launch::async, [&] { return runner.run(); });
  for (int i = 0; i < 400 && runner.portal_port() == 0; ++i) std::this_thread::sleep_for(5ms);
  ASSERT_NE(runner.portal_port(), 0);
  httplib::Client client("127.0.0.1", runner.portal_port());

  const json beans{{"crop", "beans"}, {"soil", "loam"}, {"plant_date", "2021-03-01"}, {"area_m2", 2},
                   {"flow_lph", 600}};
  auto r = client.Post("/api/application", beans.dump(), "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const auto state = json::parse(client.Get("/api/state")->body);
  EXPECT_EQ(state["phase"], "config_mode");
  EXPECT_GT(state["countdown_s"].get<double>(), 0);
  EXPECT_EQ(client.Post("/api/pump", R"({"action":"on"})", "application/json")->status, 403);

  std::this_thread::sleep_until(*runner.boot_time() + 2100ms);
  r = client.Post("/api/application", beans.dump(), "application/json");
  EXPECT_EQ(r->status, 403);
  EXPECT_EQ(json::parse(r->body)["error"], "config_window_closed");

  r = client.Post("/api/pump", R"({"action":"on"})", "application/json");
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(r->body)["pump"]["source"], "manual");

  runner.request_stop();
  const auto report = done.get();
  EXPECT_EQ(report.portal_disabled, 1u);
  EXPECT_EQ(report.setups, 1u);
  EXPECT_EQ(fp::DeviceDataStore(dir.path()).load().application->crop_name, "beans");
  EXPECT_TRUE(std::filesystem::exists(dir / std::string(fp::DeviceRunner::kStageCsv)));
}

TEST(Runner, OutageBackloggedAndDrainedInOrder) {
  fp::StubBroker broker;
  testing_support::TempDir dir;
  auto sc = steady_scenario(dir, broker);
  sc.broker_faults = {{300, 900}};
  fp::SteadyClock clock;
  fp::DeviceRunner runner({sc, dir.path(), std::nullopt, "0.0.0.0", std::nullopt, 20}, clock);
  const auto report = runner.run();
  EXPECT_EQ(report.exit_code, 0);
  EXPECT_GT(report.backlogged, 0u);
  EXPECT_EQ(report.backlog_left, 0u);
  EXPECT_EQ(report.drained, report.backlogged);
  EXPECT_EQ(runner.journal().size(), 60u);
  std::size_t telemetry = 0;
  for (const auto& p : broker.log()) telemetry += p.topic != "/usp/status/pump";
  EXPECT_GE(telemetry, 60u);
}
