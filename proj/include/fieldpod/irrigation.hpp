#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fieldpod/application.hpp"
#include "fieldpod/calendar.hpp"
#include "fieldpod/sensing.hpp"

namespace fieldpod {

enum class GrowthStage { Initial, Development, Mid, Late };
std::string_view to_string(GrowthStage stage);

struct CropProfile {
  std::string name;
  std::array<int, 4> stage_len{};  // days: initial, development, mid, late
  double kc_ini = 0;
  double kc_mid = 0;
  double kc_end = 0;
  double root_depth_m = 0;
  double depletion_fraction = 0;  // p

  int season_length() const;
  /// Throws Error(Validation) naming the offending field.
  void validate() const;
  bool operator==(const CropProfile&) const = default;
};

struct SoilProfile {
  std::string name;
  double fc = 0;  // field capacity, volumetric fraction
  double wp = 0;  // wilting point, volumetric fraction

  void validate() const;
  bool operator==(const SoilProfile&) const = default;
};

struct WeatherDay {
  Date date;
  double tmin_c = 0;
  double tmax_c = 0;
  double rain_mm = 0;

  bool operator==(const WeatherDay&) const = default;
};

struct StageEntry {
  GrowthStage stage{};
  Date start;
  int length_days = 0;

  bool operator==(const StageEntry&) const = default;
};

struct StagePlan {
  std::array<StageEntry, 4> stages{};

  Date season_start() const { return stages.front().start; }
  /// First day after the season.
  Date season_end() const { return stages.back().start + stages.back().length_days; }
  bool operator==(const StagePlan&) const = default;
};

struct IrrigationEvent {
  Date date;
  double net_depth_mm = 0;
  double gross_depth_mm = 0;
  double runtime_min = 0;

  bool operator==(const IrrigationEvent&) const = default;
};

/// How water reaches the bed: emitter efficiency, bed area, pump flow.
struct WaterApplication {
  double efficiency = 0.9;
  double area_m2 = 1;
  double flow_lph = 1;

  void validate() const;
};

/// Crop water demand for one day of the season.
struct DailyDemand {
  Date date;
  double et0_mm = 0;
  double kc = 0;
  double etc_mm = 0;
  double rain_mm = 0;
};

/// One simulated day of the root-zone water balance.
struct DailyBalance {
  DailyDemand demand;
  double etc_applied_mm = 0;   // ETc actually extracted (capped at TAW)
  double rain_applied_mm = 0;  // rain that reduced depletion (excess drains)
  double depletion_pre_mm = 0; // end of day, before any irrigation
  double irrigation_mm = 0;    // net depth applied
  double depletion_mm = 0;     // end of day, after irrigation
  std::optional<double> observed_depletion_mm;
};

struct IrrigationPlan {
  StagePlan stage_plan;
  std::vector<IrrigationEvent> events;
  double taw_mm = 0;
  double raw_mm = 0;
  WaterApplication application;
  std::vector<DailyBalance> days;
};

StagePlan stage_plan(const CropProfile& crop, Date plant_date);

/// Four-stage crop coefficient curve as a continuous function of days after
/// planting: flat kc_ini, linear to kc_mid over development, flat kc_mid, then
/// linear to kc_end, reached on the last day of the season.
double kc_at(const CropProfile& crop, double days_after_planting);
/// Throws Error(Range) outside [0, season length).
double kc_on(const CropProfile& crop, int days_after_planting);

/// Inverse relative Earth-Sun distance for a day of year.
double inverse_relative_distance(int day_of_year);
/// Solar declination in radians.
double solar_declination(int day_of_year);
/// Extraterrestrial radiation (MJ m-2 day-1) for latitude, declination and
/// inverse relative distance. Throws Error(Range) when the sun never sets or
/// never rises.
double ra_from_geometry(double latitude_rad, double declination_rad, double dr);
/// Throws Error(Range) for |latitude| >= 66.5 degrees or day outside 1..366.
double ra_extraterrestrial(double latitude_rad, int day_of_year);

/// Hargreaves-Samani reference evapotranspiration in mm/day, clamped at 0.
double et0_hargreaves(double tmin_c, double tmax_c, double ra_mj);
double et0_hargreaves(const WeatherDay& day, double latitude_rad);

double total_available_water_mm(const CropProfile& crop, const SoilProfile& soil);
double readily_available_water_mm(const CropProfile& crop, const SoilProfile& soil);

/// 1 mm over 1 m2 is one litre.
double runtime_minutes(double gross_depth_mm, double area_m2, double flow_lph);

/// Daily ET0/Kc/ETc/rain for every day of the season. Throws
/// Error(MissingData) naming the first date without weather.
std::vector<DailyDemand> demand_series(const CropProfile& crop, Date plant_date,
                                       std::span<const WeatherDay> weather, double latitude_rad);

struct BalanceResult {
  std::vector<IrrigationEvent> events;
  std::vector<DailyBalance> days;
};

/// Day-stepping root-zone balance. Depletion is clamped to [0, TAW]; when the
/// end-of-day depletion reaches RAW the bed is refilled to zero depletion.
BalanceResult run_water_balance(std::span<const DailyDemand> demand, double taw_mm, double raw_mm,
                                const WaterApplication& application, double initial_depletion_mm = 0);

IrrigationPlan simulate_balance(const ApplicationInput& input, const CropProfile& crop,
                                const SoilProfile& soil, std::span<const WeatherDay> weather,
                                double latitude_rad, double efficiency = 0.9);

/// Replaces the modelled depletion of `today` by the one implied by a soil
/// moisture reading and re-runs the balance forward. Events before today are
/// kept. Throws Error(Range) when today lies outside the season.
IrrigationPlan update_with_observation(const IrrigationPlan& plan, const SensorReading& soil_moisture,
                                       Date today, const SoilProfile& soil, const CropProfile& crop);

/// Daily Tmin/Tmax folded from live temperature readings.
class ObservedTemperatures {
 public:
  void add(const SensorReading& reading);
  const std::map<Date, std::pair<double, double>>& days() const { return days_; }

 private:
  std::map<Date, std::pair<double, double>> days_;
};

/// Weather with observed Tmin/Tmax replacing (or extending) history rows.
/// Rain is kept from history; new dates get zero rain.
std::vector<WeatherDay> fold_observed(std::span<const WeatherDay> weather,
                                      const ObservedTemperatures& observed);

/// Weather CSV: header `date,tmin_c,tmax_c,rain_mm`.
std::vector<WeatherDay> parse_weather_csv(std::string_view text);
std::vector<WeatherDay> load_weather_csv(const std::filesystem::path& path);

/// `stage,start_date,length_days`
std::string stage_table_csv(const StagePlan& plan);
/// `date,net_depth_mm,gross_depth_mm,runtime_min`
std::string event_table_csv(std::span<const IrrigationEvent> events);

}  // namespace fieldpod
