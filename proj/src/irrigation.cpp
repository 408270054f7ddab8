#include "fieldpod/irrigation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "fieldpod/error.hpp"
#include "text_util.hpp"

namespace fieldpod {

namespace {

constexpr double kSolarConstant = 0.0820;  // MJ m-2 min-1
constexpr double kMaxLatitudeRad = 66.5 * std::numbers::pi / 180.0;

[[noreturn]] void invalid(std::string field, std::string message) {
  throw Error(ErrorCode::Validation, std::move(message), std::move(field));
}

}  // namespace

std::string_view to_string(GrowthStage stage) {
  switch (stage) {
    case GrowthStage::Initial: return "initial";
    case GrowthStage::Development: return "development";
    case GrowthStage::Mid: return "mid";
    case GrowthStage::Late: return "late";
  }
  return "?";
}

int CropProfile::season_length() const {
  return std::accumulate(stage_len.begin(), stage_len.end(), 0);
}

void CropProfile::validate() const {
  if (name.empty()) invalid("name", "crop name is empty");
  for (int len : stage_len) {
    if (len <= 0) invalid("stage_len", fmt::format("crop '{}': stage lengths must be positive", name));
  }
  for (auto [field, kc] : {std::pair{"kc_ini", kc_ini}, {"kc_mid", kc_mid}, {"kc_end", kc_end}}) {
    if (!(kc > 0 && kc <= 2)) invalid(field, fmt::format("crop '{}': {} must be in (0, 2]", name, field));
  }
  if (!(root_depth_m > 0)) invalid("root_depth_m", fmt::format("crop '{}': root depth must be positive", name));
  if (!(depletion_fraction > 0 && depletion_fraction < 1)) {
    invalid("depletion_fraction_p", fmt::format("crop '{}': p must be in (0, 1)", name));
  }
}

void SoilProfile::validate() const {
  if (name.empty()) invalid("name", "soil name is empty");
  if (!(wp > 0 && wp < fc && fc < 1)) {
    invalid("fc", fmt::format("soil '{}': need 0 < wp < fc < 1", name));
  }
}

void WaterApplication::validate() const {
  if (!(efficiency > 0 && efficiency <= 1)) invalid("efficiency", "efficiency must be in (0, 1]");
  if (!(area_m2 > 0)) invalid("area_m2", "area must be positive");
  if (!(flow_lph > 0)) invalid("flow_lph", "flow must be positive");
}

StagePlan stage_plan(const CropProfile& crop, Date plant_date) {
  StagePlan plan;
  Date start = plant_date;
  for (std::size_t i = 0; i < 4; ++i) {
    plan.stages[i] = StageEntry{static_cast<GrowthStage>(i), start, crop.stage_len[i]};
    start = start + crop.stage_len[i];
  }
  return plan;
}

double kc_at(const CropProfile& crop, double t) {
  const auto [l1, l2, l3, l4] = crop.stage_len;
  if (t < l1) return crop.kc_ini;
  if (t < l1 + l2) return crop.kc_ini + (t - l1) / l2 * (crop.kc_mid - crop.kc_ini);
  if (t < l1 + l2 + l3) return crop.kc_mid;
  if (l4 <= 1) return crop.kc_end;
  const double frac = std::min((t - (l1 + l2 + l3)) / (l4 - 1), 1.0);
  return crop.kc_mid + frac * (crop.kc_end - crop.kc_mid);
}

double kc_on(const CropProfile& crop, int days_after_planting) {
  if (days_after_planting < 0 || days_after_planting >= crop.season_length()) {
    throw Error(ErrorCode::Range,
                fmt::format("day {} is outside the {}-day season of '{}'", days_after_planting,
                            crop.season_length(), crop.name),
                "days_after_planting");
  }
  return kc_at(crop, days_after_planting);
}

double inverse_relative_distance(int day_of_year) {
  return 1.0 + 0.033 * std::cos(2.0 * std::numbers::pi * day_of_year / 365.0);
}

double solar_declination(int day_of_year) {
  return 0.409 * std::sin(2.0 * std::numbers::pi * day_of_year / 365.0 - 1.39);
}

double ra_from_geometry(double latitude_rad, double declination_rad, double dr) {
  const double x = -std::tan(latitude_rad) * std::tan(declination_rad);
  if (x < -1.0 || x > 1.0) {
    throw Error(ErrorCode::Range, "polar day or night: sunset hour angle undefined", "latitude");
  }
  const double ws = std::acos(x);
  return (24.0 * 60.0 / std::numbers::pi) * kSolarConstant * dr *
         (ws * std::sin(latitude_rad) * std::sin(declination_rad) +
          std::cos(latitude_rad) * std::cos(declination_rad) * std::sin(ws));
}

double ra_extraterrestrial(double latitude_rad, int day_of_year) {
  if (!(std::abs(latitude_rad) < kMaxLatitudeRad)) {
    throw Error(ErrorCode::Range, fmt::format("latitude {} rad is polar", latitude_rad), "latitude");
  }
  if (day_of_year < 1 || day_of_year > 366) {
    throw Error(ErrorCode::Range, fmt::format("day of year {} outside 1..366", day_of_year), "day_of_year");
  }
  return ra_from_geometry(latitude_rad, solar_declination(day_of_year),
                          inverse_relative_distance(day_of_year));
}

double et0_hargreaves(double tmin_c, double tmax_c, double ra_mj) {
  const double tmean = (tmax_c + tmin_c) / 2.0;
  const double range = std::max(tmax_c - tmin_c, 0.0);
  return std::max(0.0023 * (tmean + 17.8) * std::sqrt(range) * (0.408 * ra_mj), 0.0);
}

double et0_hargreaves(const WeatherDay& day, double latitude_rad) {
  return et0_hargreaves(day.tmin_c, day.tmax_c,
                        ra_extraterrestrial(latitude_rad, day.date.day_of_year()));
}

double total_available_water_mm(const CropProfile& crop, const SoilProfile& soil) {
  return 1000.0 * (soil.fc - soil.wp) * crop.root_depth_m;
}

double readily_available_water_mm(const CropProfile& crop, const SoilProfile& soil) {
  return crop.depletion_fraction * total_available_water_mm(crop, soil);
}

double runtime_minutes(double gross_depth_mm, double area_m2, double flow_lph) {
  return gross_depth_mm * area_m2 / flow_lph * 60.0;
}

std::vector<DailyDemand> demand_series(const CropProfile& crop, Date plant_date,
                                       std::span<const WeatherDay> weather, double latitude_rad) {
  std::map<Date, const WeatherDay*> by_date;
  for (const auto& w : weather) by_date[w.date] = &w;
  const int season = crop.season_length();
  std::vector<DailyDemand> out;
  out.reserve(static_cast<std::size_t>(season));
  for (int d = 0; d < season; ++d) {
    const Date date = plant_date + d;
    const auto it = by_date.find(date);
    if (it == by_date.end()) {
      throw Error(ErrorCode::MissingData, fmt::format("no weather data for {}", date.iso()), date.iso());
    }
    DailyDemand dd;
    dd.date = date;
    dd.et0_mm = et0_hargreaves(*it->second, latitude_rad);
    dd.kc = kc_on(crop, d);
    dd.etc_mm = dd.kc * dd.et0_mm;
    dd.rain_mm = it->second->rain_mm;
    out.push_back(dd);
  }
  return out;
}

BalanceResult run_water_balance(std::span<const DailyDemand> demand, double taw_mm, double raw_mm,
                                const WaterApplication& application, double initial_depletion_mm) {
  BalanceResult result;
  result.days.reserve(demand.size());
  double depletion = std::clamp(initial_depletion_mm, 0.0, taw_mm);
  for (const auto& dd : demand) {
    DailyBalance day;
    day.demand = dd;
    day.etc_applied_mm = dd.etc_mm;
    day.rain_applied_mm = dd.rain_mm;
    const double unclamped = depletion + dd.etc_mm - dd.rain_mm;
    if (unclamped < 0) {
      day.rain_applied_mm = depletion + dd.etc_mm;
      day.depletion_pre_mm = 0;
    } else if (unclamped > taw_mm) {
      day.etc_applied_mm = dd.etc_mm - (unclamped - taw_mm);
      day.depletion_pre_mm = taw_mm;
    } else {
      day.depletion_pre_mm = unclamped;
    }
    depletion = day.depletion_pre_mm;
    if (depletion >= raw_mm && depletion > 0) {
      const double gross = depletion / application.efficiency;
      result.events.push_back(IrrigationEvent{
          dd.date, depletion, gross, runtime_minutes(gross, application.area_m2, application.flow_lph)});
      day.irrigation_mm = depletion;
      depletion = 0;
    }
    day.depletion_mm = depletion;
    result.days.push_back(day);
  }
  return result;
}

IrrigationPlan simulate_balance(const ApplicationInput& input, const CropProfile& crop,
                                const SoilProfile& soil, std::span<const WeatherDay> weather,
                                double latitude_rad, double efficiency) {
  crop.validate();
  soil.validate();
  IrrigationPlan plan;
  plan.application = WaterApplication{efficiency, input.area_m2, input.flow_lph};
  plan.application.validate();
  plan.stage_plan = stage_plan(crop, input.plant_date);
  plan.taw_mm = total_available_water_mm(crop, soil);
  plan.raw_mm = readily_available_water_mm(crop, soil);
  const auto demand = demand_series(crop, input.plant_date, weather, latitude_rad);
  auto balance = run_water_balance(demand, plan.taw_mm, plan.raw_mm, plan.application);
  plan.events = std::move(balance.events);
  plan.days = std::move(balance.days);
  return plan;
}

IrrigationPlan update_with_observation(const IrrigationPlan& plan, const SensorReading& soil_moisture,
                                       Date today, const SoilProfile& soil, const CropProfile& crop) {
  if (soil_moisture.kind != SensorKind::SoilMoisture) {
    throw Error(ErrorCode::Validation, "observation must be a soil moisture reading", "kind");
  }
  const Date start = plan.stage_plan.season_start();
  if (today < start || today >= plan.stage_plan.season_end() ||
      static_cast<std::size_t>(today - start) >= plan.days.size()) {
    throw Error(ErrorCode::Range, fmt::format("{} is outside the season", today.iso()), "today");
  }
  const auto idx = static_cast<std::size_t>(today - start);
  const double taw = total_available_water_mm(crop, soil);
  const double raw = readily_available_water_mm(crop, soil);
  const double observed =
      std::clamp((soil.fc - soil_moisture.value / 100.0) * crop.root_depth_m * 1000.0, 0.0, taw);

  IrrigationPlan out;
  out.stage_plan = plan.stage_plan;
  out.taw_mm = taw;
  out.raw_mm = raw;
  out.application = plan.application;
  for (const auto& e : plan.events) {
    if (e.date < today) out.events.push_back(e);
  }
  out.days.assign(plan.days.begin(), plan.days.begin() + static_cast<std::ptrdiff_t>(idx));

  DailyBalance day = plan.days[idx];
  day.observed_depletion_mm = observed;
  day.depletion_pre_mm = observed;
  day.irrigation_mm = 0;
  day.depletion_mm = observed;
  if (observed >= raw && observed > 0) {
    const double gross = observed / out.application.efficiency;
    out.events.push_back(IrrigationEvent{
        today, observed, gross,
        runtime_minutes(gross, out.application.area_m2, out.application.flow_lph)});
    day.irrigation_mm = observed;
    day.depletion_mm = 0;
  }
  out.days.push_back(day);

  std::vector<DailyDemand> rest;
  for (std::size_t i = idx + 1; i < plan.days.size(); ++i) rest.push_back(plan.days[i].demand);
  auto forward = run_water_balance(rest, taw, raw, out.application, day.depletion_mm);
  out.events.insert(out.events.end(), forward.events.begin(), forward.events.end());
  out.days.insert(out.days.end(), forward.days.begin(), forward.days.end());
  return out;
}

void ObservedTemperatures::add(const SensorReading& reading) {
  if (reading.kind != SensorKind::Temperature || !in_range(reading)) return;
  const Date d = date_of(reading.timestamp);
  auto [it, inserted] = days_.try_emplace(d, reading.value, reading.value);
  if (!inserted) {
    it->second.first = std::min(it->second.first, reading.value);
    it->second.second = std::max(it->second.second, reading.value);
  }
}

std::vector<WeatherDay> fold_observed(std::span<const WeatherDay> weather,
                                      const ObservedTemperatures& observed) {
  std::map<Date, WeatherDay> merged;
  for (const auto& w : weather) merged[w.date] = w;
  for (const auto& [date, t] : observed.days()) {
    auto& w = merged[date];
    w.date = date;
    w.tmin_c = t.first;
    w.tmax_c = t.second;
  }
  std::vector<WeatherDay> out;
  out.reserve(merged.size());
  for (auto& [date, w] : merged) out.push_back(w);
  return out;
}

std::vector<WeatherDay> parse_weather_csv(std::string_view text) {
  std::vector<WeatherDay> out;
  bool header = false;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (!header) {
      if (line != "date,tmin_c,tmax_c,rain_mm") {
        throw Error(ErrorCode::Parse, "weather file must start with header 'date,tmin_c,tmax_c,rain_mm'");
      }
      header = true;
      return;
    }
    const auto f = detail::split(line, ',');
    if (f.size() != 4) throw Error(ErrorCode::Parse, fmt::format("weather line {}: expected 4 fields", line_no));
    WeatherDay w{Date::parse(detail::trim(f[0])), detail::parse_number(f[1], "tmin_c"),
                 detail::parse_number(f[2], "tmax_c"), detail::parse_number(f[3], "rain_mm")};
    if (w.tmin_c > w.tmax_c) {
      throw Error(ErrorCode::Validation, fmt::format("weather line {}: tmin above tmax", line_no), "tmin_c");
    }
    if (w.rain_mm < 0) {
      throw Error(ErrorCode::Validation, fmt::format("weather line {}: negative rain", line_no), "rain_mm");
    }
    if (!out.empty() && out.back().date >= w.date) {
      throw Error(ErrorCode::Parse, fmt::format("weather line {}: dates must increase", line_no), "date");
    }
    out.push_back(w);
  });
  if (!header) throw Error(ErrorCode::Parse, "weather file is empty");
  return out;
}

std::vector<WeatherDay> load_weather_csv(const std::filesystem::path& path) {
  return parse_weather_csv(detail::read_file(path.string(), "weather"));
}

std::string stage_table_csv(const StagePlan& plan) {
  std::string out = "stage,start_date,length_days\n";
  for (const auto& s : plan.stages) {
    out += fmt::format("{},{},{}\n", to_string(s.stage), s.start.iso(), s.length_days);
  }
  return out;
}

std::string event_table_csv(std::span<const IrrigationEvent> events) {
  std::string out = "date,net_depth_mm,gross_depth_mm,runtime_min\n";
  for (const auto& e : events) {
    out += fmt::format("{},{:.3f},{:.3f},{:.3f}\n", e.date.iso(), e.net_depth_mm, e.gross_depth_mm,
                       e.runtime_min);
  }
  return out;
}

}  // namespace fieldpod
