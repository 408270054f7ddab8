#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "fieldpod/application.hpp"
#include "fieldpod/irrigation.hpp"

namespace fieldpod {

/// Crop and soil database. The shipped values are typical agronomy-table
/// figures and are meant to be replaced with local data.
class Catalog {
 public:
  static constexpr std::string_view kFileName = "catalog.json";

  Catalog() = default;
  Catalog(std::vector<CropProfile> crops, std::vector<SoilProfile> soils);

  /// JSON array of {"type":"crop",...} / {"type":"soil",...} objects.
  static Catalog parse_json(std::string_view text);
  static Catalog load(const std::filesystem::path& path);
  /// The database compiled into the binary.
  static Catalog seeded();
  static std::string_view seeded_json();
  /// `<dir>/catalog.json` if present, otherwise the seeded database.
  static Catalog load_or_seed(const std::filesystem::path& dir);

  const std::vector<CropProfile>& crops() const { return crops_; }
  const std::vector<SoilProfile>& soils() const { return soils_; }
  std::vector<std::string> crop_names() const;
  std::vector<std::string> soil_names() const;

  /// Throw Error(Validation) with field "crop" / "soil" for unknown names.
  const CropProfile& crop(std::string_view name) const;
  const SoilProfile& soil(std::string_view name) const;

  /// Checks names against the database plus positive area and flow.
  void validate(const ApplicationInput& input) const;

 private:
  std::vector<CropProfile> crops_;
  std::vector<SoilProfile> soils_;
};

}  // namespace fieldpod
