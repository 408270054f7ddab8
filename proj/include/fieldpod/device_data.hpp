#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "fieldpod/application.hpp"

namespace fieldpod {

struct NetworkConfig {
  std::string ssid;
  std::string passphrase;  // never logged or echoed

  bool operator==(const NetworkConfig&) const = default;
};

struct DeviceData {
  std::optional<ApplicationInput> application;
  std::optional<NetworkConfig> network;
};

/// The device data file: a JSON object
/// {"crop","soil","plant_date","area_m2","flow_lph","network":{...}}.
/// Writes go through a temp file and rename.
class DeviceDataStore {
 public:
  static constexpr std::string_view kFileName = "device.json";

  explicit DeviceDataStore(std::filesystem::path dir);

  /// Missing file yields empty data; a corrupt file throws Error(Parse).
  DeviceData load() const;
  /// Throw Error(Storage) when the file cannot be written.
  void save_application(const ApplicationInput& input);
  void save_network(const NetworkConfig& network);

  const std::filesystem::path& path() const { return path_; }
  void set_write_failure(bool fail) { write_failure_ = fail; }

 private:
  void write(const DeviceData& data);

  std::filesystem::path dir_;
  std::filesystem::path path_;
  bool write_failure_ = false;
};

}  // namespace fieldpod
