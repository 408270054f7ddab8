#include <gtest/gtest.h>

#include <set>

#include "fieldpod/error.hpp"
#include "fieldpod/sensing.hpp"

namespace fp = fieldpod;
using fp::SensorKind;

namespace {
const auto kStart = fp::parse_utc("2021-03-01T00:00:00Z");
}

TEST(Catalogue, ActiveKindsAndCodes) {
  const auto active = fp::active_kinds();
  ASSERT_EQ(active.size(), 3u);
  EXPECT_EQ(fp::spec_of(SensorKind::Temperature).code, "temp");
  EXPECT_EQ(fp::spec_of(SensorKind::Humidity).code, "humid");
  EXPECT_EQ(fp::spec_of(SensorKind::SoilMoisture).code, "sm");
  EXPECT_FALSE(fp::is_active(SensorKind::LightIntensity));
  EXPECT_FALSE(fp::is_active(SensorKind::Rain));
  EXPECT_EQ(fp::kind_from_code("sm"), SensorKind::SoilMoisture);
  EXPECT_FALSE(fp::kind_from_code("light").has_value());
}

TEST(Validate, BoundsAreInclusive) {
  fp::SensorReading r{SensorKind::Temperature, 85.0, kStart, "d"};
  EXPECT_NO_THROW(fp::validate(r));
  r.value = -40.0;
  EXPECT_NO_THROW(fp::validate(r));
  r.value = 85.1;
  EXPECT_FALSE(fp::in_range(r));
  try {
    fp::validate(r);
    FAIL();
  } catch (const fp::Error& e) {
    EXPECT_EQ(e.code(), fp::ErrorCode::Range);
    EXPECT_NE(std::string(e.what()).find("85.1"), std::string::npos);
  }
  EXPECT_FALSE(fp::in_range({SensorKind::SoilMoisture, -0.5, kStart, "d"}));
  EXPECT_FALSE(fp::in_range({SensorKind::Humidity, 100.5, kStart, "d"}));
}

TEST(Stream, RejectsInactiveKindAndNonIncreasingOffsets) {
  EXPECT_THROW(fp::ScenarioStream({{0, SensorKind::Rain, 1}}), fp::Error);
  EXPECT_THROW(fp::ScenarioStream({{10, SensorKind::Temperature, 1}, {10, SensorKind::Temperature, 2}}), fp::Error);
  EXPECT_THROW(fp::ScenarioStream({{-1, SensorKind::Temperature, 1}}), fp::Error);
  EXPECT_NO_THROW(fp::ScenarioStream({{10, SensorKind::Temperature, 1}, {10, SensorKind::Humidity, 2}}));
}

TEST(Stream, SampleHoldsLatestValuePerKind) {
  const fp::ScenarioStream s({{0, SensorKind::Temperature, 20},
                              {0, SensorKind::SoilMoisture, 30},
                              {60, SensorKind::Temperature, 21},
                              {120, SensorKind::Humidity, 55}});
  auto r = fp::sample(s, 90, kStart, "dev");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].kind, SensorKind::Temperature);
  EXPECT_EQ(r[0].value, 21);
  EXPECT_EQ(r[0].timestamp, kStart + std::chrono::seconds(90));
  EXPECT_EQ(r[0].device_id, "dev");
  r = fp::sample(s, 120, kStart, "dev");
  EXPECT_EQ(r.size(), 3u);
  EXPECT_TRUE(fp::sample(fp::ScenarioStream{}, 10, kStart, "dev").empty());
}

TEST(Replay, CsvRoundTrip) {
  const auto s = fp::parse_replay_csv("offset_s,kind,value\n0,temp,24.5\n0,sm,31\n60,temp,25\n");
  ASSERT_EQ(s.records().size(), 3u);
  EXPECT_EQ(s.records()[1].kind, SensorKind::SoilMoisture);
  EXPECT_THROW(fp::parse_replay_csv("t,kind,value\n"), fp::Error);
  EXPECT_THROW(fp::parse_replay_csv("offset_s,kind,value\n0,light,3\n"), fp::Error);
  EXPECT_THROW(fp::parse_replay_csv("offset_s,kind,value\n0,temp,abc\n"), fp::Error);
  EXPECT_THROW(fp::load_replay_csv("/nonexistent/replay.csv"), fp::Error);
}

TEST(Simulator, DeterministicPerSeedAndInRange) {
  const auto src = fp::SimulatedSource::farming_defaults(42);
  const auto a = fp::generate(src, 86400, 600);
  const auto b = fp::generate(src, 86400, 600);
  EXPECT_EQ(a.records(), b.records());
  EXPECT_EQ(a.records().size(), 145u * 3u);
  const auto c = fp::generate(fp::SimulatedSource::farming_defaults(43), 86400, 600);
  EXPECT_NE(a.records(), c.records());
  for (const auto& r : a.records()) {
    const auto range = fp::spec_of(r.kind).range;
    EXPECT_GE(r.value, range.min);
    EXPECT_LE(r.value, range.max);
  }
  EXPECT_THROW(fp::generate(src, 100, 0), fp::Error);
}

TEST(SimulatedFeed, MatchesPregeneratedStream) {
  const auto source = fp::SimulatedSource::farming_defaults(42);
  const auto stream = fp::generate(source, 3 * 86400.0, 60);
  fp::SimulatedFeed feed(source, 60);
  const auto start = fp::parse_utc("2021-03-01T00:00:00Z");
  for (double t : {0.0, 59.9, 60.0, 120.0, 3000.0, 3030.0, 86400.0, 200000.0, 259200.0}) {
    EXPECT_EQ(feed.sample(t, start, "d"), fp::sample(stream, t, start, "d")) << t;
  }
  EXPECT_EQ(feed.sample(60.0, start, "d"), fp::sample(stream, 60.0, start, "d"));
  EXPECT_THROW(fp::SimulatedFeed(source, 0), fp::Error);
}
