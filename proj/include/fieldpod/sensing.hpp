#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fieldpod/calendar.hpp"

namespace fieldpod {

/// Sensor catalogue. Only the first three kinds are active in the farming
/// application; the others exist so the catalogue can grow without touching
/// the wire formats.
enum class SensorKind : std::uint8_t {
  Temperature,
  Humidity,
  SoilMoisture,
  LightIntensity,
  Rain,
};

struct SensorRange {
  double min;
  double max;
};

struct SensorSpec {
  SensorKind kind;
  std::string_view name;
  std::string_view unit;
  std::string_view code;  // replay-file token and topic leaf
  SensorRange range;
  bool active;
};

std::span<const SensorSpec> sensor_catalogue();
const SensorSpec& spec_of(SensorKind kind);
std::span<const SensorKind> active_kinds();
bool is_active(SensorKind kind);
/// Looks up an active kind by its code ("temp", "humid", "sm").
std::optional<SensorKind> kind_from_code(std::string_view code);

struct SensorReading {
  SensorKind kind{};
  double value{};
  UtcTime timestamp{};
  std::string device_id;

  bool operator==(const SensorReading&) const = default;
};

/// Throws Error(Range) naming kind, value and bounds when the value lies
/// outside the kind's physical range (bounds inclusive).
void validate(const SensorReading& reading);
bool in_range(const SensorReading& reading) noexcept;

struct StreamRecord {
  double offset_s{};
  SensorKind kind{};
  double value{};

  bool operator==(const StreamRecord&) const = default;
};

/// Ordered sensor trace. Offsets are strictly increasing per kind and only
/// active kinds may appear.
class ScenarioStream {
 public:
  ScenarioStream() = default;
  explicit ScenarioStream(std::vector<StreamRecord> records);

  const std::vector<StreamRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

 private:
  std::vector<StreamRecord> records_;
  // per active kind, indices into records_ sorted by offset
  std::vector<std::vector<std::size_t>> by_kind_;

  friend std::vector<SensorReading> sample(const ScenarioStream&, double, UtcTime,
                                           std::string_view);
};

/// Latest record per kind with offset <= sim_time, as readings stamped
/// start + sim_time. Kinds with no record yet are omitted.
std::vector<SensorReading> sample(const ScenarioStream& stream, double sim_time, UtcTime start,
                                  std::string_view device_id);

struct SimulatedChannel {
  SensorKind kind{};
  double baseline{};
  double amplitude{};
  double period_s{86400.0};
  double noise{};  // half-width of the uniform noise band
};

struct SimulatedSource {
  std::uint64_t seed{1};
  std::vector<SimulatedChannel> channels;

  static SimulatedSource farming_defaults(std::uint64_t seed = 1);
};

/// Sinusoid plus seeded uniform noise, one record per channel every step_s
/// over [0, horizon_s]. Values are clamped into the kind's range.
ScenarioStream generate(const SimulatedSource& source, double horizon_s, double step_s);

/// The values of generate() produced on demand, for open-ended runs. Sample
/// times should be non-decreasing; going back restarts the generator.
class SimulatedFeed {
 public:
  SimulatedFeed(SimulatedSource source, double step_s);
  std::vector<SensorReading> sample(double sim_time, UtcTime start, std::string_view device_id);

 private:
  SimulatedSource source_;
  double step_s_;
  std::mt19937_64 rng_;
  std::uint64_t current_step_ = 0;
  std::vector<double> current_;
};

/// Replay CSV: header `offset_s,kind,value`, kind in {temp,humid,sm}.
ScenarioStream parse_replay_csv(std::string_view text);
ScenarioStream load_replay_csv(const std::filesystem::path& path);

}  // namespace fieldpod
