#include "fieldpod/sensing.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "fieldpod/error.hpp"

namespace fieldpod {

namespace {

constexpr std::array kCatalogue{
    SensorSpec{SensorKind::Temperature, "temperature", "degC", "temp", {-40.0, 85.0}, true},
    SensorSpec{SensorKind::Humidity, "humidity", "%RH", "humid", {0.0, 100.0}, true},
    SensorSpec{SensorKind::SoilMoisture, "soil moisture", "%VWC", "sm", {0.0, 100.0}, true},
    SensorSpec{SensorKind::LightIntensity, "light intensity", "lux", "light", {0.0, 200000.0}, false},
    SensorSpec{SensorKind::Rain, "rain", "mm", "rain", {0.0, 500.0}, false},
};

constexpr std::array kActive{SensorKind::Temperature, SensorKind::Humidity,
                             SensorKind::SoilMoisture};

constexpr std::size_t kActiveCount = kActive.size();

std::size_t active_index(SensorKind kind) {
  for (std::size_t i = 0; i < kActive.size(); ++i) {
    if (kActive[i] == kind) return i;
  }
  throw Error(ErrorCode::Validation,
              fmt::format("sensor kind '{}' is not active", spec_of(kind).name));
}

double parse_double(std::string_view text, std::string_view what) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::Parse, fmt::format("bad {} '{}'", what, text));
  }
  return v;
}

}  // namespace

std::span<const SensorSpec> sensor_catalogue() { return kCatalogue; }

const SensorSpec& spec_of(SensorKind kind) {
  for (const auto& s : kCatalogue) {
    if (s.kind == kind) return s;
  }
  throw Error(ErrorCode::Validation, "unknown sensor kind");
}

std::span<const SensorKind> active_kinds() { return kActive; }

bool is_active(SensorKind kind) { return spec_of(kind).active; }

std::optional<SensorKind> kind_from_code(std::string_view code) {
  for (const auto& s : kCatalogue) {
    if (s.active && s.code == code) return s.kind;
  }
  return std::nullopt;
}

bool in_range(const SensorReading& reading) noexcept {
  for (const auto& s : kCatalogue) {
    if (s.kind == reading.kind) {
      return std::isfinite(reading.value) && reading.value >= s.range.min &&
             reading.value <= s.range.max;
    }
  }
  return false;
}

void validate(const SensorReading& reading) {
  if (in_range(reading)) return;
  const auto& s = spec_of(reading.kind);
  throw Error(ErrorCode::Range, fmt::format("{} reading {} {} outside [{}, {}]", s.name,
                                            reading.value, s.unit, s.range.min, s.range.max));
}

ScenarioStream::ScenarioStream(std::vector<StreamRecord> records)
    : records_(std::move(records)), by_kind_(kActiveCount) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (!std::isfinite(r.offset_s) || r.offset_s < 0) {
      throw Error(ErrorCode::Validation, fmt::format("record {}: negative or non-finite offset", i));
    }
    auto& idx = by_kind_[active_index(r.kind)];
    if (!idx.empty() && records_[idx.back()].offset_s >= r.offset_s) {
      throw Error(ErrorCode::Validation,
                  fmt::format("record {}: offsets for '{}' must be strictly increasing", i,
                              spec_of(r.kind).code));
    }
    idx.push_back(i);
  }
}

std::vector<SensorReading> sample(const ScenarioStream& stream, double sim_time, UtcTime start,
                                  std::string_view device_id) {
  std::vector<SensorReading> out;
  if (stream.records_.empty()) return out;
  const auto stamp = start + std::chrono::seconds{static_cast<long long>(std::floor(sim_time))};
  for (std::size_t k = 0; k < kActiveCount; ++k) {
    const auto& idx = stream.by_kind_[k];
    auto it = std::upper_bound(idx.begin(), idx.end(), sim_time, [&](double t, std::size_t i) {
      return t < stream.records_[i].offset_s;
    });
    if (it == idx.begin()) continue;
    const auto& rec = stream.records_[*std::prev(it)];
    out.push_back(SensorReading{rec.kind, rec.value, stamp, std::string(device_id)});
  }
  return out;
}

SimulatedSource SimulatedSource::farming_defaults(std::uint64_t seed) {
  return SimulatedSource{seed,
                         {
                             {SensorKind::Temperature, 26.0, 6.0, 86400.0, 0.5},
                             {SensorKind::Humidity, 60.0, 15.0, 86400.0, 2.0},
                             {SensorKind::SoilMoisture, 24.0, 6.0, 43200.0, 0.5},
                         }};
}

namespace {

// 53 high bits -> [0,1); independent of the standard library's distribution details
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double channel_value(const SimulatedChannel& ch, double t, std::mt19937_64& rng) {
  const auto range = spec_of(ch.kind).range;
  const double v = ch.baseline + ch.amplitude * std::sin(2.0 * std::numbers::pi * t / ch.period_s) +
                   ch.noise * (2.0 * unit(rng) - 1.0);
  return std::clamp(v, range.min, range.max);
}

void check_step(double step_s) {
  if (!(step_s > 0)) throw Error(ErrorCode::Configuration, "generator step must be positive", "step");
}

}  // namespace

ScenarioStream generate(const SimulatedSource& source, double horizon_s, double step_s) {
  check_step(step_s);
  std::mt19937_64 rng(source.seed);
  std::vector<StreamRecord> records;
  const auto steps = static_cast<std::size_t>(std::floor(horizon_s / step_s));
  records.reserve((steps + 1) * source.channels.size());
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * step_s;
    for (const auto& ch : source.channels) records.push_back({t, ch.kind, channel_value(ch, t, rng)});
  }
  return ScenarioStream{std::move(records)};
}

SimulatedFeed::SimulatedFeed(SimulatedSource source, double step_s)
    : source_(std::move(source)), step_s_(step_s), rng_(source_.seed) {
  check_step(step_s);
}

std::vector<SensorReading> SimulatedFeed::sample(double sim_time, UtcTime start, std::string_view device_id) {
  if (sim_time < 0 || source_.channels.empty()) return {};
  auto step = static_cast<std::uint64_t>(std::floor(sim_time / step_s_));
  while (static_cast<double>(step + 1) * step_s_ <= sim_time) ++step;
  while (step > 0 && static_cast<double>(step) * step_s_ > sim_time) --step;
  if (current_.empty() || step < current_step_) {
    // Going backwards means starting over; the runner never does.
    rng_.seed(source_.seed);
    current_.clear();
    current_step_ = 0;
  }
  auto compute = [&](std::uint64_t i) {
    const double t = static_cast<double>(i) * step_s_;
    current_.clear();
    for (const auto& ch : source_.channels) current_.push_back(channel_value(ch, t, rng_));
    current_step_ = i;
  };
  if (current_.empty()) compute(0);
  while (current_step_ < step) compute(current_step_ + 1);

  const auto stamp = start + std::chrono::seconds{static_cast<long long>(std::floor(sim_time))};
  std::vector<SensorReading> out;
  for (std::size_t c = 0; c < source_.channels.size(); ++c) {
    out.push_back(SensorReading{source_.channels[c].kind, current_[c], stamp, std::string(device_id)});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.kind < b.kind; });
  return out;
}

ScenarioStream parse_replay_csv(std::string_view text) {
  std::vector<StreamRecord> records;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "offset_s,kind,value") {
        throw Error(ErrorCode::Parse, "replay file must start with header 'offset_s,kind,value'");
      }
      header_seen = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string_view::npos || line.find(',', c2 + 1) != std::string_view::npos) {
      throw Error(ErrorCode::Parse, fmt::format("replay line {}: expected 3 fields", line_no));
    }
    const auto kind = kind_from_code(line.substr(c1 + 1, c2 - c1 - 1));
    if (!kind) {
      throw Error(ErrorCode::Parse, fmt::format("replay line {}: unknown kind '{}'", line_no,
                                                line.substr(c1 + 1, c2 - c1 - 1)));
    }
    records.push_back({parse_double(line.substr(0, c1), "offset"), *kind,
                       parse_double(line.substr(c2 + 1), "value")});
  }
  if (!header_seen) throw Error(ErrorCode::Parse, "replay file is empty");
  return ScenarioStream{std::move(records)};
}

ScenarioStream load_replay_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open replay file " + path.string(), "replay");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_replay_csv(ss.str());
}

}  // namespace fieldpod
