#include <gtest/gtest.h>

#include "fieldpod/error.hpp"
#include "fieldpod/publisher.hpp"
#include "fieldpod/stub_broker.hpp"
#include "temp_dir.hpp"

namespace fp = fieldpod;
using namespace std::chrono_literals;
using testing_support::TempDir;

namespace {

const auto kT0 = fp::parse_utc("2021-03-01T00:00:00Z");

fp::MqttOptions options_for(const fp::StubBroker& broker) {
  fp::MqttOptions o;
  o.address = broker.address();
  o.connect_timeout = 500ms;
  o.io_timeout = 500ms;
  return o;
}

fp::TelemetryRecord rec(std::uint64_t seq) {
  return {seq, fp::Topic("/usp/sm"), fp::format_one_decimal(static_cast<double>(seq)),
          kT0 + std::chrono::seconds(seq)};
}

std::vector<std::string> payloads(const std::vector<fp::StubBroker::LoggedPublish>& log) {
  std::vector<std::string> out;
  for (const auto& p : log) out.push_back(p.payload);
  return out;
}

}  // namespace

TEST(Publish, HappyPathReachesBroker) {
  fp::StubBroker broker;
  fp::MqttSession s(options_for(broker));
  s.connect();
  fp::publish(s, rec(1));
  ASSERT_EQ(broker.log().size(), 1u);
  EXPECT_EQ(broker.log()[0].topic, "/usp/sm");
  EXPECT_EQ(broker.log()[0].qos, 1);
  EXPECT_FALSE(broker.log()[0].retain);
}

TEST(Publish, BrokerDownIsTransportError) {
  fp::StubBroker broker;
  broker.set_available(false);
  fp::MqttSession s(options_for(broker));
  try {
    s.connect();
    fp::publish(s, rec(1));
    FAIL();
  } catch (const fp::Error& e) {
    EXPECT_EQ(e.code(), fp::ErrorCode::Transport);
  }
}

TEST(Publish, DropAfterFirstByteThenRetryDelivers) {
  fp::StubBroker broker;
  fp::MqttSession s(options_for(broker));
  s.connect();
  broker.drop_on_next_publish_first_byte();
  EXPECT_THROW(fp::publish(s, rec(1)), fp::Error);
  s.connect();
  fp::publish(s, rec(1));
  ASSERT_GE(broker.log().size(), 1u);
  EXPECT_EQ(broker.log().back().payload, "1.0");
}

TEST(Drain, InOrder) {
  TempDir dir;
  fp::StubBroker broker;
  fp::BacklogStore store(dir.path());
  for (int i = 1; i <= 3; ++i) store.append(rec(store.next_seq()));
  fp::MqttSession s(options_for(broker));
  s.connect();
  EXPECT_EQ(fp::backlog_drain(store, s), 3u);
  EXPECT_EQ(payloads(broker.log()), (std::vector<std::string>{"1.0", "2.0", "3.0"}));
  EXPECT_TRUE(store.empty());
}

TEST(Drain, EmptyStore) {
  TempDir dir;
  fp::StubBroker broker;
  fp::BacklogStore store(dir.path());
  fp::MqttSession s(options_for(broker));
  s.connect();
  EXPECT_EQ(fp::backlog_drain(store, s), 0u);
}

TEST(Drain, FailAfterTwoRetainsTail) {
  TempDir dir;
  fp::StubBroker broker;
  fp::BacklogStore store(dir.path());
  for (int i = 1; i <= 5; ++i) store.append(rec(store.next_seq()));
  broker.fail_after_publishes(2);
  fp::MqttSession s(options_for(broker));
  s.connect();
  EXPECT_EQ(fp::backlog_drain(store, s), 2u);
  const auto left = store.pending();
  ASSERT_EQ(left.size(), 3u);
  EXPECT_EQ(left.front().seq, 3u);
  EXPECT_EQ(left.back().seq, 5u);
}

TEST(Publisher, BacklogsDuringOutageAndDrainsFirst) {
  TempDir dir;
  fp::StubBroker broker;
  fp::BacklogStore store(dir.path());
  fp::MqttSession inner(options_for(broker));
  bool down = false;
  fp::FaultInjectingSession s(inner, [&] { return down; });
  fp::ManualClock clock;
  fp::TelemetryPublisher pub(store, s, clock, {});

  auto reading = [](double v) {
    return std::vector{fp::SensorReading{fp::SensorKind::SoilMoisture, v, kT0, "d"}};
  };
  EXPECT_EQ(pub.submit(reading(1)).live, 1u);
  down = true;
  EXPECT_EQ(pub.submit(reading(2)).backlogged, 1u);
  EXPECT_EQ(pub.submit(reading(3)).backlogged, 1u);
  down = false;
  const auto out = pub.submit(reading(4));
  EXPECT_EQ(out.drained, 2u);
  EXPECT_EQ(out.live, 1u);
  EXPECT_EQ(payloads(broker.log()), (std::vector<std::string>{"1.0", "2.0", "3.0", "4.0"}));
  EXPECT_TRUE(store.empty());
}

TEST(Publisher, RetryIntervalGatesReconnects) {
  TempDir dir;
  fp::StubBroker broker;
  broker.set_available(false);
  fp::BacklogStore store(dir.path());
  fp::MqttSession s(options_for(broker));
  fp::ManualClock clock;
  fp::TelemetryPublisher pub(store, s, clock, {"/usp", 10s});
  EXPECT_FALSE(pub.ensure_connected());
  const auto attempts = broker.connections_accepted();
  broker.set_available(true);
  EXPECT_FALSE(pub.ensure_connected());
  EXPECT_EQ(broker.connections_accepted(), attempts);
  clock.advance(10s);
  EXPECT_TRUE(pub.ensure_connected());
}

TEST(Publisher, StorageFailurePropagates) {
  TempDir dir;
  fp::StubBroker broker;
  broker.set_available(false);
  fp::BacklogStore store(dir.path());
  store.set_write_failure(true);
  fp::MqttSession s(options_for(broker));
  fp::ManualClock clock;
  fp::TelemetryPublisher pub(store, s, clock, {});
  try {
    pub.submit(std::vector{fp::SensorReading{fp::SensorKind::Temperature, 20, kT0, "d"}});
    FAIL();
  } catch (const fp::Error& e) {
    EXPECT_EQ(e.code(), fp::ErrorCode::Storage);
  }
}
