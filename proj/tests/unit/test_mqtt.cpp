#include <gtest/gtest.h>

#include <thread>

#include "fieldpod/broker_session.hpp"
#include "fieldpod/error.hpp"
#include "fieldpod/mqtt.hpp"
#include "fieldpod/stub_broker.hpp"

namespace fp = fieldpod;
namespace mqtt = fieldpod::mqtt;
using namespace std::chrono_literals;

namespace {

mqtt::Packet round_trip(const mqtt::Packet& p) {
  const auto bytes = mqtt::encode(p);
  const auto d = mqtt::decode(bytes);
  EXPECT_TRUE(d.has_value());
  EXPECT_EQ(d->consumed, bytes.size());
  return d->packet;
}

fp::MqttOptions options_for(const fp::StubBroker& broker, std::string id = "fieldpod") {
  fp::MqttOptions o;
  o.address = broker.address();
  o.client_id = std::move(id);
  o.connect_timeout = 1s;
  o.io_timeout = 1s;
  return o;
}

}  // namespace

TEST(Codec, EveryPacketRoundTrips) {
  const std::vector<mqtt::Packet> packets{
      mqtt::Connect{"dev-1", 30, true},
      mqtt::Connack{false, 0},
      mqtt::Publish{"/usp/temp", "24.5", 1, false, false, 7},
      mqtt::Publish{"/usp/status/pump", "on", 0, true, false, 0},
      mqtt::Puback{7},
      mqtt::Subscribe{3, {{"/usp/cmd/pump", 1}, {"/usp/#", 0}}},
      mqtt::Suback{3, {1, 0}},
      mqtt::Pingreq{},
      mqtt::Pingresp{},
      mqtt::Disconnect{},
  };
  for (const auto& p : packets) EXPECT_EQ(round_trip(p), p);
}

TEST(Codec, ConnectHeaderBytes) {
  const auto bytes = mqtt::encode(mqtt::Connect{"ab", 60, true});
  const std::vector<std::uint8_t> expected{0x10, 14, 0, 4, 'M', 'Q', 'T', 'T', 4, 0x02, 0, 60, 0, 2, 'a', 'b'};
  EXPECT_EQ(bytes, expected);
}

TEST(Codec, LongRemainingLengthAndPartialInput) {
  const mqtt::Publish big{"/t", std::string(300, 'x'), 0, false, false, 0};
  const auto bytes = mqtt::encode(big);
  EXPECT_EQ(bytes[1] & 0x80, 0x80);  // two-byte remaining length
  for (std::size_t cut : {std::size_t{0}, std::size_t{1}, std::size_t{2}, bytes.size() - 1}) {
    EXPECT_FALSE(mqtt::decode(std::span(bytes.data(), cut)).has_value());
  }
  EXPECT_EQ(round_trip(big), mqtt::Packet{big});
}

TEST(Codec, MalformedInputThrows) {
  const std::vector<std::uint8_t> reserved{0x00, 0x00};
  EXPECT_THROW(mqtt::decode(reserved), fp::Error);
  const std::vector<std::uint8_t> bad_len{0x30, 0xff, 0xff, 0xff, 0xff, 0x01};
  EXPECT_THROW(mqtt::decode(bad_len), fp::Error);
}

TEST(Filters, Wildcards) {
  EXPECT_TRUE(mqtt::topic_matches("/usp/cmd/pump", "/usp/cmd/pump"));
  EXPECT_TRUE(mqtt::topic_matches("/usp/+", "/usp/sm"));
  EXPECT_FALSE(mqtt::topic_matches("/usp/+", "/usp/cmd/pump"));
  EXPECT_TRUE(mqtt::topic_matches("/usp/#", "/usp/cmd/pump"));
  EXPECT_TRUE(mqtt::topic_matches("#", "/usp/sm"));
  EXPECT_FALSE(mqtt::topic_matches("/usp/temp", "/usp/sm"));
}

TEST(Session, PublishIsAcknowledgedAndLogged) {
  fp::StubBroker broker;
  fp::MqttSession s(options_for(broker));
  s.connect();
  ASSERT_TRUE(s.connected());
  s.publish("/usp/temp", "24.5", 1, false);
  const auto log = broker.log();
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].client_id, "fieldpod");
  EXPECT_EQ(log[0].topic, "/usp/temp");
  EXPECT_EQ(log[0].payload, "24.5");
  EXPECT_EQ(log[0].qos, 1);
  EXPECT_FALSE(log[0].retain);
}

TEST(Session, ConnectRefusedIsTransportError) {
  std::uint16_t port;
  {
    fp::StubBroker broker;
    port = broker.port();
  }
  fp::MqttOptions o;
  o.address = {"127.0.0.1", port};
  o.connect_timeout = 500ms;
  fp::MqttSession s(o);
  try {
    s.connect();
    FAIL();
  } catch (const fp::Error& e) {
    EXPECT_EQ(e.code(), fp::ErrorCode::Transport);
  }
  EXPECT_FALSE(s.connected());
}

TEST(Session, MissingAckTimesOut) {
  fp::StubBroker broker;
  broker.suppress_acks(true);
  auto o = options_for(broker);
  o.io_timeout = 200ms;
  fp::MqttSession s(o);
  s.connect();
  EXPECT_THROW(s.publish("/usp/sm", "1.0", 1, false), fp::Error);
  EXPECT_FALSE(s.connected());
}

TEST(Session, SubscribeReceivesInjectedAndRetained) {
  fp::StubBroker broker;
  broker.inject("/usp/cmd/pump", "on", true);
  fp::MqttSession s(options_for(broker));
  s.connect();
  s.subscribe("/usp/cmd/pump");
  std::vector<fp::InboundMessage> got;
  for (int i = 0; i < 50 && got.empty(); ++i) {
    auto batch = s.poll();
    got.insert(got.end(), batch.begin(), batch.end());
    if (got.empty()) std::this_thread::sleep_for(10ms);
  }
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].payload, "on");
  EXPECT_TRUE(got[0].retain);

  broker.inject("/usp/cmd/pump", "off");
  got.clear();
  for (int i = 0; i < 50 && got.empty(); ++i) {
    auto batch = s.poll();
    got.insert(got.end(), batch.begin(), batch.end());
    if (got.empty()) std::this_thread::sleep_for(10ms);
  }
  ASSERT_EQ(got.size(), 1u);
  EXPECT_EQ(got[0].payload, "off");
}

TEST(Session, RetainedPublishIsStored) {
  fp::StubBroker broker;
  fp::MqttSession s(options_for(broker));
  s.connect();
  s.publish("/usp/status/pump", "off", 1, true);
  EXPECT_EQ(broker.retained("/usp/status/pump"), "off");
}

TEST(Broker, UnavailableDropsClients) {
  fp::StubBroker broker;
  fp::MqttSession s(options_for(broker));
  s.connect();
  broker.set_available(false);
  EXPECT_THROW(s.publish("/usp/temp", "1.0", 1, false), fp::Error);
  EXPECT_THROW(s.connect(), fp::Error);
  broker.set_available(true);
  s.connect();
  s.publish("/usp/temp", "1.0", 1, false);
  EXPECT_EQ(broker.log().size(), 1u);
}

TEST(FaultInjection, DownMeansTransportError) {
  fp::StubBroker broker;
  fp::MqttSession inner(options_for(broker));
  bool down = false;
  fp::FaultInjectingSession s(inner, [&] { return down; });
  s.connect();
  down = true;
  EXPECT_THROW(s.publish("/usp/temp", "1.0", 1, false), fp::Error);
  EXPECT_FALSE(s.connected());
  EXPECT_THROW(s.connect(), fp::Error);
  down = false;
  s.connect();
  s.publish("/usp/temp", "1.0", 1, false);
  EXPECT_EQ(broker.log().size(), 1u);
}
