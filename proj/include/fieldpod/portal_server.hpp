#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fieldpod/actuation.hpp"
#include "fieldpod/application.hpp"
#include "fieldpod/control_queue.hpp"
#include "fieldpod/device_data.hpp"
#include "fieldpod/event_hub.hpp"
#include "fieldpod/portal.hpp"

namespace fieldpod {

struct StateSnapshot {
  std::string phase;
  std::optional<double> countdown_s;  // wall seconds left in the config window
  std::optional<std::string> fault_reason;
  double sim_time_s = 0;
  double sample_period_s = 0;
  std::optional<ApplicationInput> application;
  bool pump_on = false;
  std::string pump_source;
  std::vector<StreamEvent> latest;  // last update per topic
};

/// What the HTTP layer needs from the device. Every method is invoked on
/// the control loop thread via ControlQueue.
class PortalHost {
 public:
  virtual ~PortalHost() = default;
  virtual ConfigPortal& portal() = 0;
  virtual StateSnapshot snapshot() = 0;
  virtual void apply_network(const NetworkConfig& config) = 0;
  virtual void submit_application(const ApplicationInput& input) = 0;
  /// Throws Error(Precondition) unless the device is operational.
  virtual RelayState manual_pump(PumpAction action) = 0;
};

/// JSON API plus static UI. Handlers run on httplib worker threads and only
/// reach device state through the control queue.
class PortalServer {
 public:
  static constexpr int kDefaultPort = 8266;

  struct Options {
    std::string host = "0.0.0.0";
    int port = kDefaultPort;  // 0 picks a free port
    std::optional<std::filesystem::path> web_root;
    Duration call_timeout = std::chrono::seconds(5);
  };

  PortalServer(PortalHost& host, ControlQueue& queue, EventHub& hub, Options options);
  ~PortalServer();
  PortalServer(const PortalServer&) = delete;
  PortalServer& operator=(const PortalServer&) = delete;

  /// Binds and starts serving on a background thread. Throws
  /// Error(Configuration) when the port cannot be bound.
  void start();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace fieldpod
