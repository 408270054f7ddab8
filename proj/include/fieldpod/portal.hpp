#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fieldpod/catalog.hpp"
#include "fieldpod/device.hpp"
#include "fieldpod/device_data.hpp"

namespace fieldpod {

enum class Security { Open, WPA2 };

std::string_view to_string(Security security);
/// "open" or "wpa2" (case-insensitive); anything else throws Error(Parse).
Security parse_security(std::string_view text);

struct NetworkInfo {
  std::string ssid;
  int rssi_dbm = 0;
  Security security = Security::Open;
  bool connected = false;

  bool operator==(const NetworkInfo&) const = default;
};

/// Wi-Fi stand-in: the scan table comes from the scenario and connecting
/// flips a flag.
class SimulatedWifi {
 public:
  SimulatedWifi() = default;
  /// Throws Error(Validation) for empty/duplicate ssids, positive rssi or
  /// more than one connected entry.
  explicit SimulatedWifi(std::vector<NetworkInfo> table);

  /// Sorted by rssi descending, ties by ssid.
  std::vector<NetworkInfo> scan() const;
  std::optional<NetworkInfo> find(std::string_view ssid) const;
  std::optional<NetworkInfo> connected() const;
  /// Throws Error(NotFound) for an unknown ssid.
  void connect(std::string_view ssid);

 private:
  std::vector<NetworkInfo> table_;
};

struct NetworkStatus {
  std::optional<NetworkInfo> connected;
  std::vector<NetworkInfo> neighbors;
};

/// Portal operations. Not thread-safe: the HTTP layer calls these from the
/// control loop through ControlQueue.
class ConfigPortal {
 public:
  static constexpr std::size_t kMinPassphrase = 8;

  ConfigPortal(const Catalog& catalog, SimulatedWifi wifi, DeviceDataStore& store);

  std::vector<NetworkInfo> list_networks() const { return wifi_.scan(); }
  NetworkStatus network_info() const;
  std::vector<std::string> crop_options() const { return catalog_.crop_names(); }
  std::vector<std::string> soil_options() const { return catalog_.soil_names(); }

  /// Errors: ModeViolation outside ConfigMode, NotFound for an unknown ssid,
  /// Validation for an empty ssid or a WPA2 passphrase shorter than 8.
  void apply_network(const DeviceState& state, const NetworkConfig& config);
  /// Delegates to commit_application and returns the new state.
  DeviceState submit_application(const DeviceState& state, const ApplicationInput& input);

  const Catalog& catalog() const { return catalog_; }

 private:
  const Catalog& catalog_;
  SimulatedWifi wifi_;
  DeviceDataStore& store_;
};

}  // namespace fieldpod
