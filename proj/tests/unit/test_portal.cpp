#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <json.hpp>
#include <thread>

#include "fieldpod/error.hpp"
#include "fieldpod/portal.hpp"
#include "fieldpod/portal_server.hpp"
#include "temp_dir.hpp"

namespace fp = fieldpod;
using json = nlohmann::json;
using namespace std::chrono_literals;

namespace {

std::vector<fp::NetworkInfo> table() {
  return {{"barn", -70, fp::Security::Open, false},
          {"farm-ap", -40, fp::Security::WPA2, false},
          {"alpha", -70, fp::Security::WPA2, false}};
}

fp::ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const fp::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return fp::ErrorCode::Precondition;
}

}  // namespace

TEST(Wifi, ScanSortedByRssiThenSsid) {
  fp::SimulatedWifi wifi(table());
  const auto scan = wifi.scan();
  ASSERT_EQ(scan.size(), 3u);
  EXPECT_EQ(scan[0].ssid, "farm-ap");
  EXPECT_EQ(scan[1].ssid, "alpha");
  EXPECT_EQ(scan[2].ssid, "barn");
}

TEST(Wifi, TableInvariants) {
  auto t = table();
  t.push_back({"barn", -50, fp::Security::Open, false});
  EXPECT_EQ(code_of([&] { fp::SimulatedWifi{t}; }), fp::ErrorCode::Validation);
  EXPECT_EQ(code_of([] { fp::SimulatedWifi{{{"", -50, fp::Security::Open, false}}}; }), fp::ErrorCode::Validation);
  EXPECT_EQ(code_of([] { fp::SimulatedWifi{{{"x", 5, fp::Security::Open, false}}}; }), fp::ErrorCode::Validation);
  EXPECT_EQ(code_of([] {
              fp::SimulatedWifi{{{"x", -5, fp::Security::Open, true}, {"y", -5, fp::Security::Open, true}}};
            }),
            fp::ErrorCode::Validation);
}

TEST(Wifi, ConnectMovesTheFlag) {
  fp::SimulatedWifi wifi(table());
  EXPECT_FALSE(wifi.connected().has_value());
  wifi.connect("barn");
  EXPECT_EQ(wifi.connected()->ssid, "barn");
  wifi.connect("alpha");
  EXPECT_EQ(wifi.connected()->ssid, "alpha");
  EXPECT_FALSE(wifi.find("barn")->connected);
  EXPECT_EQ(code_of([&] { wifi.connect("nowhere"); }), fp::ErrorCode::NotFound);
}

TEST(Security, ParseAndPrint) {
  EXPECT_EQ(fp::parse_security("WPA2"), fp::Security::WPA2);
  EXPECT_EQ(fp::parse_security("open"), fp::Security::Open);
  EXPECT_EQ(fp::to_string(fp::Security::WPA2), "wpa2");
  EXPECT_EQ(code_of([] { fp::parse_security("wep"); }), fp::ErrorCode::Parse);
}

TEST(ConfigPortal, NetworkRules) {
  testing_support::TempDir dir;
  fp::DeviceDataStore store(dir.path());
  const auto cat = fp::Catalog::seeded();
  fp::ConfigPortal portal(cat, fp::SimulatedWifi(table()), store);
  const auto st = fp::boot({}, fp::Instant{});

  try {
    portal.apply_network(st, {"farm-ap", "short"});
    FAIL();
  } catch (const fp::Error& e) {
    EXPECT_EQ(e.code(), fp::ErrorCode::Validation);
    EXPECT_EQ(e.field(), "passphrase");
    EXPECT_EQ(std::string(e.what()).find("short"), std::string::npos);
  }
  EXPECT_EQ(code_of([&] { portal.apply_network(st, {"", ""}); }), fp::ErrorCode::Validation);
  EXPECT_EQ(code_of([&] { portal.apply_network(st, {"nowhere", "whatever1"}); }), fp::ErrorCode::NotFound);
  EXPECT_FALSE(store.load().network.has_value());

  portal.apply_network(st, {"barn", ""});
  EXPECT_EQ(portal.network_info().connected->ssid, "barn");
  EXPECT_EQ(portal.network_info().neighbors.size(), 2u);
  portal.apply_network(st, {"farm-ap", "longenough"});
  EXPECT_EQ(store.load().network->ssid, "farm-ap");

  const auto closed = fp::tick(st, st.boot_time + 200s, false).state;
  EXPECT_EQ(code_of([&] { portal.apply_network(closed, {"barn", ""}); }), fp::ErrorCode::ModeViolation);
  EXPECT_EQ(portal.network_info().connected->ssid, "farm-ap");
}

TEST(ConfigPortal, OptionsComeFromCatalog) {
  testing_support::TempDir dir;
  fp::DeviceDataStore store(dir.path());
  const auto cat = fp::Catalog::seeded();
  fp::ConfigPortal portal(cat, fp::SimulatedWifi(table()), store);
  EXPECT_EQ(portal.crop_options(), cat.crop_names());
  EXPECT_EQ(portal.soil_options(), cat.soil_names());
}

TEST(EventHub, FanOutAndClose) {
  fp::EventHub hub(2);
  auto a = hub.subscribe();
  auto b = hub.subscribe();
  EXPECT_EQ(hub.subscribers(), 2u);
  for (int i = 0; i < 3; ++i) hub.publish({"/usp/sm", std::to_string(i), "t"});
  EXPECT_EQ(a->next(10ms)->payload, "1");  // oldest dropped at capacity
  EXPECT_EQ(b->next(10ms)->payload, "1");
  b.reset();
  EXPECT_EQ(hub.subscribers(), 1u);
  hub.close();
  a->next(10ms);
  EXPECT_FALSE(a->next(10ms).has_value());
  EXPECT_TRUE(a->closed());
  EXPECT_EQ(json::parse(fp::to_json({"/usp/temp", "24.5", "2021-03-01T00:00:00Z"})),
            (json{{"topic", "/usp/temp"}, {"payload", "24.5"}, {"ts", "2021-03-01T00:00:00Z"}}));
}

TEST(ControlQueue, RunsOnLoopThreadAndTimesOut) {
  fp::ControlQueue q;
  std::atomic<bool> stop{false};
  std::thread::id loop_id;
  std::thread loop([&] {
    loop_id = std::this_thread::get_id();
    while (!stop) {
      q.run_pending();
      q.wait_for(5ms);
    }
  });
  const auto id = q.call([] { return std::this_thread::get_id(); });
  EXPECT_NE(id, std::this_thread::get_id());
  EXPECT_EQ(code_of([&] { q.call([]() -> int { throw fp::Error(fp::ErrorCode::Range, "x"); }); }),
            fp::ErrorCode::Range);
  stop = true;
  loop.join();
  EXPECT_EQ(id, loop_id);
  EXPECT_EQ(code_of([&] { q.call([] { return 1; }, 20ms); }), fp::ErrorCode::Transport);
  q.close();
  EXPECT_EQ(code_of([&] { q.call([] { return 1; }); }), fp::ErrorCode::Transport);
}

namespace {

// Device stand-in driven by a loop thread, as the runner does.
class FakeHost : public fp::PortalHost {
 public:
  explicit FakeHost(const std::filesystem::path& dir)
      : store_(dir), portal_(catalog_, fp::SimulatedWifi(table()), store_), state_(fp::boot({}, fp::Instant{})) {}

  fp::ConfigPortal& portal() override { return portal_; }
  fp::StateSnapshot snapshot() override {
    fp::StateSnapshot s;
    s.phase = std::string(fp::phase_name(state_.phase));
    if (state_.in_config_mode()) s.countdown_s = 42;
    s.sample_period_s = 60;
    s.application = state_.application;
    s.pump_on = relay_.pump_on;
    s.pump_source = std::string(fp::to_string(relay_.last_source));
    return s;
  }
  void apply_network(const fp::NetworkConfig& c) override { portal_.apply_network(state_, c); }
  void submit_application(const fp::ApplicationInput& in) override {
    state_ = portal_.submit_application(state_, in);
  }
  fp::RelayState manual_pump(fp::PumpAction a) override {
    if (!state_.operational()) throw fp::Error(fp::ErrorCode::Precondition, "not operational");
    relay_ = fp::apply(relay_, fp::ActuatorCommand::manual(a, {}), {});
    return relay_;
  }
  void close_window() {
    state_ = fp::tick(state_, fp::Instant{} + 1000s, false).state;
    state_ = fp::tick(state_, fp::Instant{} + 1000s, false).state;
  }
  fp::DeviceDataStore& store() { return store_; }

 private:
  fp::Catalog catalog_ = fp::Catalog::seeded();
  fp::DeviceDataStore store_;
  fp::ConfigPortal portal_;
  fp::DeviceState state_;
  fp::RelayState relay_;
};

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    host_ = std::make_unique<FakeHost>(dir_.path());
    loop_ = std::thread([this] {
      while (!stop_) {
        queue_.run_pending();
        queue_.wait_for(5ms);
      }
    });
    server_ = std::make_unique<fp::PortalServer>(*host_, queue_, hub_,
                                                 fp::PortalServer::Options{"127.0.0.1", 0, std::nullopt, 2s});
    server_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", server_->port());
  }
  void TearDown() override {
    server_->stop();
    stop_ = true;
    loop_.join();
  }
  // Mutates host state on the loop thread.
  void on_loop(auto fn) { queue_.call(std::move(fn)); }

  httplib::Result post(const std::string& path, const json& body) {
    return client_->Post(path, body.dump(), "application/json");
  }

  testing_support::TempDir dir_;
  std::unique_ptr<FakeHost> host_;
  fp::ControlQueue queue_;
  fp::EventHub hub_;
  std::atomic<bool> stop_{false};
  std::thread loop_;
  std::unique_ptr<fp::PortalServer> server_;
  std::unique_ptr<httplib::Client> client_;
};

const json kBeans{{"crop", "beans"}, {"soil", "loam"}, {"plant_date", "2021-03-01"}, {"area_m2", 2}, {"flow_lph", 600}};

}  // namespace

TEST_F(ServerTest, NetworksListedInScanOrder) {
  auto r = client_->Get("/api/networks");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const auto body = json::parse(r->body);
  ASSERT_EQ(body.size(), 3u);
  EXPECT_EQ(body[0]["ssid"], "farm-ap");
  EXPECT_EQ(body[0]["security"], "wpa2");
  EXPECT_EQ(body[0]["rssi_dbm"], -40);
}

TEST_F(ServerTest, ReadsAreIdempotent) {
  for (const char* path : {"/api/networks", "/api/network/info", "/api/application/options", "/api/state"}) {
    const auto a = client_->Get(path);
    const auto b = client_->Get(path);
    ASSERT_TRUE(a && b) << path;
    EXPECT_EQ(a->status, 200) << path;
    EXPECT_EQ(a->body, b->body) << path;
  }
}

TEST_F(ServerTest, NetworkPostNeverEchoesPassphrase) {
  const std::string secret = "hunter2hunter2";
  auto r = post("/api/network", {{"ssid", "farm-ap"}, {"passphrase", secret}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body.find(secret), std::string::npos);
  EXPECT_EQ(json::parse(r->body)["connected"]["ssid"], "farm-ap");

  r = post("/api/network", {{"ssid", "farm-ap"}, {"passphrase", "abc"}});
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(r->body.find("\"abc\""), std::string::npos);
  EXPECT_EQ(json::parse(r->body)["field"], "passphrase");

  r = post("/api/network", {{"ssid", "nowhere"}, {"passphrase", secret}});
  EXPECT_EQ(r->status, 404);
  EXPECT_EQ(json::parse(r->body)["error"], "not_found");
  EXPECT_EQ(r->body.find(secret), std::string::npos);

  for (const char* path : {"/api/network/info", "/api/state", "/api/networks"}) {
    EXPECT_EQ(client_->Get(path)->body.find(secret), std::string::npos) << path;
  }
}

TEST_F(ServerTest, ApplicationSubmitAndOptions) {
  auto r = client_->Get("/api/application/options");
  const auto opts = json::parse(r->body);
  EXPECT_EQ(opts["soils"], (json{"sand", "loam", "clay"}));

  r = post("/api/application", kBeans);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(json::parse(client_->Get("/api/state")->body)["application"]["crop"], "beans");
  EXPECT_EQ(host_->store().load().application->crop_name, "beans");

  auto bad = kBeans;
  bad["crop"] = "dragonfruit";
  r = post("/api/application", bad);
  EXPECT_EQ(r->status, 422);
  const auto err = json::parse(r->body);
  EXPECT_EQ(err["error"], "validation_error");
  EXPECT_EQ(err["field"], "crop");

  bad = kBeans;
  bad.erase("area_m2");
  r = post("/api/application", bad);
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(json::parse(r->body)["field"], "area_m2");

  r = client_->Post("/api/application", "{nope", "application/json");
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(json::parse(r->body)["error"], "parse_error");
}

TEST_F(ServerTest, WritesRejectedAfterWindowCloses) {
  EXPECT_EQ(json::parse(client_->Get("/api/state")->body)["config_open"], true);
  on_loop([this] { host_->close_window(); });
  const auto state = json::parse(client_->Get("/api/state")->body);
  EXPECT_EQ(state["phase"], "operational");
  EXPECT_EQ(state["config_open"], false);
  EXPECT_TRUE(state["countdown_s"].is_null());

  auto r = post("/api/application", kBeans);
  EXPECT_EQ(r->status, 403);
  EXPECT_EQ(json::parse(r->body)["error"], "config_window_closed");
  r = post("/api/network", {{"ssid", "barn"}, {"passphrase", ""}});
  EXPECT_EQ(r->status, 403);
  EXPECT_FALSE(host_->store().load().application.has_value());
}

TEST_F(ServerTest, PumpNeedsOperationalDevice) {
  auto r = post("/api/pump", {{"action", "on"}});
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 403);
  EXPECT_EQ(json::parse(r->body)["error"], "not_operational");

  on_loop([this] { host_->close_window(); });
  r = post("/api/pump", {{"action", "on"}});
  EXPECT_EQ(r->status, 200);
  const auto body = json::parse(r->body);
  EXPECT_EQ(body["pump"]["on"], true);
  EXPECT_EQ(body["pump"]["source"], "manual");
  EXPECT_EQ(json::parse(client_->Get("/api/state")->body)["pump"]["on"], true);

  r = post("/api/pump", {{"action", "ON"}});
  EXPECT_EQ(r->status, 422);
  EXPECT_EQ(json::parse(r->body)["field"], "action");
}

TEST_F(ServerTest, StreamDeliversUpdateEvents) {
  std::string received;
  std::atomic<bool> done{false};
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", server_->port());
    c.set_read_timeout(5s);
    c.Get("/api/stream", [&](const char* data, std::size_t n) {
      received.append(data, n);
      if (received.find("\n\n", received.find("event: update")) != std::string::npos) {
        done = true;
        return false;
      }
      return true;
    });
  });
  for (int i = 0; i < 200 && hub_.subscribers() == 0; ++i) std::this_thread::sleep_for(5ms);
  ASSERT_EQ(hub_.subscribers(), 1u);
  hub_.publish({"/usp/sm", "27.5", "2021-03-01T06:01:00Z"});
  reader.join();
  ASSERT_TRUE(done);
  const auto start = received.find("event: update\ndata: ");
  ASSERT_NE(start, std::string::npos);
  const auto data_begin = start + std::string("event: update\ndata: ").size();
  const auto data = json::parse(received.substr(data_begin, received.find("\n\n", data_begin) - data_begin));
  EXPECT_EQ(data["topic"], "/usp/sm");
  EXPECT_EQ(data["payload"], "27.5");
  EXPECT_EQ(data["ts"], "2021-03-01T06:01:00Z");
}

TEST_F(ServerTest, RootServesPlaceholder) {
  const auto r = client_->Get("/");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_NE(r->get_header_value("Content-Type").find("text/html"), std::string::npos);
}

TEST(Server, StopsPromptlyWithOpenStream) {
  testing_support::TempDir dir;
  FakeHost host(dir.path());
  fp::ControlQueue queue;
  fp::EventHub hub;
  fp::PortalServer server(host, queue, hub, {"127.0.0.1", 0, std::nullopt, 1s});
  server.start();
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", server.port());
    c.Get("/api/stream", [](const char*, std::size_t) { return true; });
  });
  for (int i = 0; i < 200 && hub.subscribers() == 0; ++i) std::this_thread::sleep_for(5ms);
  const auto t0 = std::chrono::steady_clock::now();
  server.stop();
  reader.join();
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 3s);
}
