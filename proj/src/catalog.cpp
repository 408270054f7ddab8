#include "fieldpod/catalog.hpp"

#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "fieldpod/error.hpp"
#include "text_util.hpp"

namespace fieldpod {

namespace {

using nlohmann::json;

CropProfile crop_from(const json& j) {
  CropProfile c;
  c.name = j.at("name").get<std::string>();
  const auto& len = j.at("stage_len");
  if (!len.is_array() || len.size() != 4) {
    throw Error(ErrorCode::Validation, fmt::format("crop '{}': stage_len needs 4 entries", c.name), "stage_len");
  }
  for (std::size_t i = 0; i < 4; ++i) c.stage_len[i] = len[i].get<int>();
  c.kc_ini = j.at("kc_ini").get<double>();
  c.kc_mid = j.at("kc_mid").get<double>();
  c.kc_end = j.at("kc_end").get<double>();
  c.root_depth_m = j.at("root_depth_m").get<double>();
  c.depletion_fraction = j.at("depletion_fraction_p").get<double>();
  return c;
}

SoilProfile soil_from(const json& j) {
  return SoilProfile{j.at("name").get<std::string>(), j.at("fc").get<double>(), j.at("wp").get<double>()};
}

}  // namespace

Catalog::Catalog(std::vector<CropProfile> crops, std::vector<SoilProfile> soils)
    : crops_(std::move(crops)), soils_(std::move(soils)) {
  std::set<std::string> seen;
  for (const auto& c : crops_) {
    c.validate();
    if (!seen.insert("crop:" + c.name).second) {
      throw Error(ErrorCode::Validation, fmt::format("duplicate crop '{}'", c.name), "crop");
    }
  }
  for (const auto& s : soils_) {
    s.validate();
    if (!seen.insert("soil:" + s.name).second) {
      throw Error(ErrorCode::Validation, fmt::format("duplicate soil '{}'", s.name), "soil");
    }
  }
}

Catalog Catalog::parse_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, fmt::format("catalog is not valid JSON: {}", e.what()));
  }
  if (!doc.is_array()) throw Error(ErrorCode::Parse, "catalog must be a JSON array");
  std::vector<CropProfile> crops;
  std::vector<SoilProfile> soils;
  try {
    for (const auto& entry : doc) {
      const auto type = entry.at("type").get<std::string>();
      if (type == "crop") {
        crops.push_back(crop_from(entry));
      } else if (type == "soil") {
        soils.push_back(soil_from(entry));
      } else {
        throw Error(ErrorCode::Parse, fmt::format("unknown catalog entry type '{}'", type), "type");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, fmt::format("malformed catalog entry: {}", e.what()));
  }
  return Catalog{std::move(crops), std::move(soils)};
}

Catalog Catalog::load(const std::filesystem::path& path) {
  return parse_json(detail::read_file(path.string(), "catalog"));
}

Catalog Catalog::seeded() { return parse_json(seeded_json()); }

Catalog Catalog::load_or_seed(const std::filesystem::path& dir) {
  const auto path = dir / kFileName;
  if (std::filesystem::exists(path)) return load(path);
  return seeded();
}

std::vector<std::string> Catalog::crop_names() const {
  std::vector<std::string> out;
  for (const auto& c : crops_) out.push_back(c.name);
  return out;
}

std::vector<std::string> Catalog::soil_names() const {
  std::vector<std::string> out;
  for (const auto& s : soils_) out.push_back(s.name);
  return out;
}

const CropProfile& Catalog::crop(std::string_view name) const {
  for (const auto& c : crops_) {
    if (c.name == name) return c;
  }
  throw Error(ErrorCode::Validation, fmt::format("unknown crop '{}'", name), "crop");
}

const SoilProfile& Catalog::soil(std::string_view name) const {
  for (const auto& s : soils_) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::Validation, fmt::format("unknown soil '{}'", name), "soil");
}

void Catalog::validate(const ApplicationInput& input) const {
  if (input.crop_name.empty()) throw Error(ErrorCode::Validation, "crop is required", "crop");
  if (input.soil_name.empty()) throw Error(ErrorCode::Validation, "soil is required", "soil");
  crop(input.crop_name);
  soil(input.soil_name);
  if (!(input.area_m2 > 0)) throw Error(ErrorCode::Validation, "area must be positive", "area_m2");
  if (!(input.flow_lph > 0)) throw Error(ErrorCode::Validation, "flow must be positive", "flow_lph");
}

}  // namespace fieldpod
