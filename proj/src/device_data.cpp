#include "fieldpod/device_data.hpp"

#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "fieldpod/error.hpp"
#include "text_util.hpp"

namespace fieldpod {

using nlohmann::json;

DeviceDataStore::DeviceDataStore(std::filesystem::path dir)
    : dir_(std::move(dir)), path_(dir_ / kFileName) {}

DeviceData DeviceDataStore::load() const {
  DeviceData data;
  if (!std::filesystem::exists(path_)) return data;
  json doc;
  try {
    doc = json::parse(detail::read_file(path_.string(), "device data"));
    if (doc.contains("crop")) {
      data.application = ApplicationInput{doc.at("crop").get<std::string>(), doc.at("soil").get<std::string>(),
                                          Date::parse(doc.at("plant_date").get<std::string>()),
                                          doc.at("area_m2").get<double>(), doc.at("flow_lph").get<double>()};
    }
    if (doc.contains("network") && doc["network"].is_object() && doc["network"].contains("ssid")) {
      data.network = NetworkConfig{doc["network"].at("ssid").get<std::string>(),
                                   doc["network"].value("passphrase", std::string{})};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, fmt::format("device data file {} is malformed: {}", path_.string(), e.what()));
  }
  return data;
}

void DeviceDataStore::save_application(const ApplicationInput& input) {
  DeviceData data;
  try {
    data = load();
  } catch (const Error&) {
  }
  data.application = input;
  write(data);
}

void DeviceDataStore::save_network(const NetworkConfig& network) {
  DeviceData data;
  try {
    data = load();
  } catch (const Error&) {
  }
  data.network = network;
  write(data);
}

void DeviceDataStore::write(const DeviceData& data) {
  if (write_failure_) throw Error(ErrorCode::Storage, "device data storage unavailable (injected)");
  json doc = json::object();
  if (data.application) {
    const auto& a = *data.application;
    doc["crop"] = a.crop_name;
    doc["soil"] = a.soil_name;
    doc["plant_date"] = a.plant_date.iso();
    doc["area_m2"] = a.area_m2;
    doc["flow_lph"] = a.flow_lph;
  }
  doc["network"] = json::object();
  if (data.network) {
    doc["network"]["ssid"] = data.network->ssid;
    doc["network"]["passphrase"] = data.network->passphrase;
  }
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  const auto tmp = path_.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::Storage, fmt::format("cannot write {}", tmp));
  }
  std::filesystem::rename(tmp, path_, ec);
  if (ec) throw Error(ErrorCode::Storage, fmt::format("cannot replace {}: {}", path_.string(), ec.message()));
}

}  // namespace fieldpod
