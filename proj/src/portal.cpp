#include "fieldpod/portal.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fieldpod/error.hpp"

namespace fieldpod {

std::string_view to_string(Security security) { return security == Security::Open ? "open" : "wpa2"; }

Security parse_security(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "open") return Security::Open;
  if (lower == "wpa2") return Security::WPA2;
  throw Error(ErrorCode::Parse, fmt::format("unknown security '{}' (expected open or wpa2)", text), "security");
}

SimulatedWifi::SimulatedWifi(std::vector<NetworkInfo> table) : table_(std::move(table)) {
  std::set<std::string> seen;
  int connected = 0;
  for (const auto& n : table_) {
    if (n.ssid.empty()) throw Error(ErrorCode::Validation, "network ssid must not be empty", "ssid");
    if (!seen.insert(n.ssid).second) {
      throw Error(ErrorCode::Validation, fmt::format("duplicate ssid '{}'", n.ssid), "ssid");
    }
    if (n.rssi_dbm > 0) {
      throw Error(ErrorCode::Validation, fmt::format("rssi for '{}' must be <= 0 dBm", n.ssid), "rssi_dbm");
    }
    connected += n.connected ? 1 : 0;
  }
  if (connected > 1) throw Error(ErrorCode::Validation, "at most one network may be connected", "connected");
}

std::vector<NetworkInfo> SimulatedWifi::scan() const {
  auto out = table_;
  std::sort(out.begin(), out.end(), [](const NetworkInfo& a, const NetworkInfo& b) {
    return a.rssi_dbm != b.rssi_dbm ? a.rssi_dbm > b.rssi_dbm : a.ssid < b.ssid;
  });
  return out;
}

std::optional<NetworkInfo> SimulatedWifi::find(std::string_view ssid) const {
  for (const auto& n : table_) {
    if (n.ssid == ssid) return n;
  }
  return std::nullopt;
}

std::optional<NetworkInfo> SimulatedWifi::connected() const {
  for (const auto& n : table_) {
    if (n.connected) return n;
  }
  return std::nullopt;
}

void SimulatedWifi::connect(std::string_view ssid) {
  if (!find(ssid)) throw Error(ErrorCode::NotFound, fmt::format("no network named '{}' in range", ssid), "ssid");
  for (auto& n : table_) n.connected = (n.ssid == ssid);
}

ConfigPortal::ConfigPortal(const Catalog& catalog, SimulatedWifi wifi, DeviceDataStore& store)
    : catalog_(catalog), wifi_(std::move(wifi)), store_(store) {}

NetworkStatus ConfigPortal::network_info() const {
  NetworkStatus status{wifi_.connected(), {}};
  for (auto& n : wifi_.scan()) {
    if (!n.connected) status.neighbors.push_back(std::move(n));
  }
  return status;
}

void ConfigPortal::apply_network(const DeviceState& state, const NetworkConfig& config) {
  if (!state.in_config_mode()) {
    throw Error(ErrorCode::ModeViolation,
                fmt::format("configuration window closed (phase {})", phase_name(state.phase)));
  }
  if (config.ssid.empty()) throw Error(ErrorCode::Validation, "ssid must not be empty", "ssid");
  const auto target = wifi_.find(config.ssid);
  if (!target) {
    throw Error(ErrorCode::NotFound, fmt::format("no network named '{}' in range", config.ssid), "ssid");
  }
  if (target->security == Security::WPA2 && config.passphrase.size() < kMinPassphrase) {
    throw Error(ErrorCode::Validation,
                fmt::format("WPA2 passphrase must be at least {} characters", kMinPassphrase), "passphrase");
  }
  store_.save_network(config);
  wifi_.connect(config.ssid);
  spdlog::info("portal: joined network '{}'", config.ssid);
}

DeviceState ConfigPortal::submit_application(const DeviceState& state, const ApplicationInput& input) {
  auto next = commit_application(state, input, catalog_, store_);
  spdlog::info("portal: application saved (crop {}, soil {}, planted {})", input.crop_name, input.soil_name,
               input.plant_date.iso());
  return next;
}

}  // namespace fieldpod
