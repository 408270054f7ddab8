#include <gtest/gtest.h>

#include "fieldpod/actuation.hpp"
#include "fieldpod/catalog.hpp"
#include "fieldpod/error.hpp"

namespace fp = fieldpod;
using fp::PumpAction;
using namespace std::chrono_literals;

namespace {
const auto kT0 = fp::parse_utc("2021-03-01T06:00:00Z");
const fp::DecisionPolicy kPolicy{20, 35};
const fp::RelayState kOff{false, kT0, fp::CommandSource::Auto};
const fp::RelayState kOn{true, kT0, fp::CommandSource::Auto};
}  // namespace

TEST(Policy, Validation) {
  EXPECT_NO_THROW(kPolicy.validate());
  EXPECT_THROW((fp::DecisionPolicy{35, 20}).validate(), fp::Error);
  EXPECT_THROW((fp::DecisionPolicy{20, 20}).validate(), fp::Error);
  EXPECT_THROW((fp::DecisionPolicy{-1, 20}).validate(), fp::Error);
  EXPECT_THROW((fp::DecisionPolicy{20, 101}).validate(), fp::Error);
}

TEST(Policy, DerivedFromSoil) {
  const auto cat = fp::Catalog::seeded();
  const auto p = fp::DecisionPolicy::from_soil(cat.soil("loam"), cat.crop("beans"));
  EXPECT_NEAR(p.sm_low, 100 * (0.25 - 0.45 * 0.13), 1e-9);
  EXPECT_NEAR(p.sm_high, 23.75, 1e-9);
}

TEST(Decide, Examples) {
  EXPECT_EQ(fp::decide(kPolicy, 18, kOff, kT0)->action, PumpAction::On);
  EXPECT_FALSE(fp::decide(kPolicy, 30, kOff, kT0).has_value());
  EXPECT_EQ(fp::decide(kPolicy, 36, kOn, kT0)->action, PumpAction::Off);
  EXPECT_FALSE(fp::decide(kPolicy, 30, kOn, kT0).has_value());
  EXPECT_EQ(fp::decide(kPolicy, 20, kOff, kT0)->source, fp::CommandSource::Auto);
}

TEST(Merge, ManualPrecedenceAndExpiry) {
  const auto on = fp::ActuatorCommand::automatic(PumpAction::On, kT0);
  const auto manual_off = fp::ActuatorCommand::manual(PumpAction::Off, kT0, 60s);
  EXPECT_EQ(fp::merge(on, manual_off, kT0 + 30s)->action, PumpAction::Off);
  EXPECT_EQ(fp::merge(on, manual_off, kT0 + 60s)->action, PumpAction::On);
  EXPECT_FALSE(fp::merge(std::nullopt, std::nullopt, kT0).has_value());
}

TEST(Command, ManualNeedsPositiveTtl) {
  EXPECT_THROW(fp::ActuatorCommand::manual(PumpAction::On, kT0, 0s), fp::Error);
  EXPECT_FALSE(fp::ActuatorCommand::automatic(PumpAction::On, kT0).ttl.has_value());
  EXPECT_EQ(fp::ActuatorCommand::manual(PumpAction::On, kT0).ttl, fp::kDefaultManualTtl);
}

TEST(Apply, TransitionsAndIdempotence) {
  const auto later = kT0 + 10s;
  auto r = fp::apply(kOff, fp::ActuatorCommand::automatic(PumpAction::On, later), later);
  EXPECT_TRUE(r.pump_on);
  EXPECT_EQ(r.since, later);
  const auto same = fp::apply(r, fp::ActuatorCommand::automatic(PumpAction::On, later + 5s), later + 5s);
  EXPECT_EQ(same, r);
  const auto off = fp::apply(r, fp::ActuatorCommand::manual(PumpAction::Off, later + 9s), later + 9s);
  EXPECT_FALSE(off.pump_on);
  EXPECT_EQ(off.last_source, fp::CommandSource::Manual);
}

TEST(Payload, ExactTokens) {
  EXPECT_EQ(fp::parse_pump_payload("on"), PumpAction::On);
  EXPECT_EQ(fp::parse_pump_payload("off"), PumpAction::Off);
  EXPECT_FALSE(fp::parse_pump_payload("ON").has_value());
  EXPECT_FALSE(fp::parse_pump_payload(" on").has_value());
}

TEST(Controller, DownThenUpTraceSwitchesOncePerDirection) {
  fp::PumpController c(kPolicy, 60s, kT0);
  std::vector<double> trace;
  for (double v = 40; v >= 10; v -= 1) trace.push_back(v);
  for (double v = 10; v <= 40; v += 1) trace.push_back(v);
  auto t = kT0;
  for (double v : trace) {
    t += 60s;
    c.on_sample(v, t);
  }
  ASSERT_EQ(c.auto_commands().size(), 2u);
  EXPECT_EQ(c.auto_commands()[0].action, PumpAction::On);
  EXPECT_EQ(c.auto_commands()[1].action, PumpAction::Off);
}

TEST(Controller, NeverAutoOnAtOrAboveHighThreshold) {
  fp::PumpController c(kPolicy, 60s, kT0);
  auto t = kT0;
  for (double v : {50.0, 19.0, 25.0, 36.0, 35.0, 10.0, 34.9, 35.0}) {
    t += 60s;
    c.on_sample(v, t);
    if (v >= kPolicy.sm_high) EXPECT_FALSE(c.relay().pump_on) << v;
  }
}

TEST(Controller, ManualOffSuppressesAutoUntilTtl) {
  fp::PumpController c(kPolicy, 60s, kT0, 600s);
  c.on_manual(PumpAction::Off, kT0);
  auto t = kT0;
  for (int i = 1; i < 10; ++i) {
    t = kT0 + i * 60s;
    const auto step = c.on_sample(10.0, t);
    EXPECT_FALSE(c.relay().pump_on) << i;
    EXPECT_EQ(step.command->source, fp::CommandSource::Manual);
  }
  EXPECT_TRUE(c.auto_commands().empty());
  c.on_sample(10.0, kT0 + 600s);
  EXPECT_TRUE(c.relay().pump_on);
  EXPECT_EQ(c.relay().last_source, fp::CommandSource::Auto);
}

TEST(Controller, ManualActsImmediately) {
  fp::PumpController c(kPolicy, 60s, kT0);
  const auto step = c.on_manual(PumpAction::On, kT0 + 5s);
  EXPECT_TRUE(step.changed);
  EXPECT_TRUE(c.relay().pump_on);
  EXPECT_EQ(c.relay().last_source, fp::CommandSource::Manual);
}

TEST(Controller, StaleGuardForcesOffAfterThreePeriods) {
  fp::PumpController c(kPolicy, 60s, kT0);
  c.on_sample(10.0, kT0 + 60s);
  ASSERT_TRUE(c.relay().pump_on);
  c.on_sample(std::nullopt, kT0 + 120s);
  c.on_sample(std::nullopt, kT0 + 180s);
  EXPECT_TRUE(c.relay().pump_on);
  const auto step = c.on_sample(std::nullopt, kT0 + 240s);
  EXPECT_TRUE(step.changed);
  EXPECT_FALSE(c.relay().pump_on);
  EXPECT_EQ(c.auto_commands().back().action, PumpAction::Off);
}
