#include "fieldpod/mqtt.hpp"

#include <fmt/format.h>

#include "fieldpod/error.hpp"

namespace fieldpod::mqtt {

namespace {

constexpr std::size_t kMaxRemaining = 268'435'455;

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_str(Bytes& out, std::string_view s) {
  if (s.size() > 0xFFFF) throw Error(ErrorCode::Validation, "MQTT string longer than 65535 bytes");
  put_u16(out, static_cast<std::uint16_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

Bytes frame(std::uint8_t first, const Bytes& body) {
  if (body.size() > kMaxRemaining) throw Error(ErrorCode::Validation, "MQTT packet too large");
  Bytes out{first};
  std::size_t len = body.size();
  do {
    std::uint8_t b = len % 128;
    len /= 128;
    if (len > 0) b |= 0x80;
    out.push_back(b);
  } while (len > 0);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> body) : body_(body) {}

  std::uint8_t u8() {
    need(1);
    return body_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>((body_[pos_] << 8) | body_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::string str() {
    const auto n = u16();
    return bytes(n);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(body_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string rest() { return bytes(body_.size() - pos_); }
  bool done() const { return pos_ == body_.size(); }

 private:
  void need(std::size_t n) const {
    if (body_.size() - pos_ < n) throw Error(ErrorCode::Parse, "MQTT packet truncated");
  }
  std::span<const std::uint8_t> body_;
  std::size_t pos_ = 0;
};

struct Encoder {
  Bytes operator()(const Connect& c) const {
    Bytes body;
    put_str(body, "MQTT");
    body.push_back(4);  // protocol level 3.1.1
    body.push_back(c.clean_session ? 0x02 : 0x00);
    put_u16(body, c.keepalive_s);
    put_str(body, c.client_id);
    return frame(0x10, body);
  }
  Bytes operator()(const Connack& c) const {
    return frame(0x20, Bytes{static_cast<std::uint8_t>(c.session_present ? 1 : 0), c.return_code});
  }
  Bytes operator()(const Publish& p) const {
    if (p.qos > 1) throw Error(ErrorCode::Validation, "QoS 2 is not supported");
    Bytes body;
    put_str(body, p.topic);
    if (p.qos > 0) put_u16(body, p.packet_id);
    body.insert(body.end(), p.payload.begin(), p.payload.end());
    const auto first = static_cast<std::uint8_t>(0x30 | (p.dup ? 0x08 : 0) | (p.qos << 1) |
                                                 (p.retain ? 0x01 : 0));
    return frame(first, body);
  }
  Bytes operator()(const Puback& p) const {
    Bytes body;
    put_u16(body, p.packet_id);
    return frame(0x40, body);
  }
  Bytes operator()(const Subscribe& s) const {
    Bytes body;
    put_u16(body, s.packet_id);
    for (const auto& [filter, qos] : s.filters) {
      put_str(body, filter);
      body.push_back(qos);
    }
    return frame(0x82, body);
  }
  Bytes operator()(const Suback& s) const {
    Bytes body;
    put_u16(body, s.packet_id);
    body.insert(body.end(), s.return_codes.begin(), s.return_codes.end());
    return frame(0x90, body);
  }
  Bytes operator()(const Pingreq&) const { return {0xC0, 0x00}; }
  Bytes operator()(const Pingresp&) const { return {0xD0, 0x00}; }
  Bytes operator()(const Disconnect&) const { return {0xE0, 0x00}; }
};

Packet parse_body(std::uint8_t first, std::span<const std::uint8_t> body) {
  Reader r(body);
  const auto type = static_cast<PacketType>(first >> 4);
  const std::uint8_t flags = first & 0x0F;
  switch (type) {
    case PacketType::Connect: {
      Connect c;
      if (r.str() != "MQTT") throw Error(ErrorCode::Parse, "unsupported MQTT protocol name");
      if (r.u8() != 4) throw Error(ErrorCode::Parse, "unsupported MQTT protocol level");
      const auto cflags = r.u8();
      c.clean_session = (cflags & 0x02) != 0;
      c.keepalive_s = r.u16();
      c.client_id = r.str();
      // will/username/password are not used by this project; ignore the rest
      return c;
    }
    case PacketType::Connack: {
      Connack c;
      c.session_present = (r.u8() & 0x01) != 0;
      c.return_code = r.u8();
      return c;
    }
    case PacketType::Publish: {
      Publish p;
      p.dup = (flags & 0x08) != 0;
      p.qos = (flags >> 1) & 0x03;
      p.retain = (flags & 0x01) != 0;
      if (p.qos > 1) throw Error(ErrorCode::Parse, "QoS 2 is not supported");
      p.topic = r.str();
      if (p.qos > 0) p.packet_id = r.u16();
      p.payload = r.rest();
      return p;
    }
    case PacketType::Puback:
      return Puback{r.u16()};
    case PacketType::Subscribe: {
      if (flags != 0x02) throw Error(ErrorCode::Parse, "bad SUBSCRIBE flags");
      Subscribe s;
      s.packet_id = r.u16();
      while (!r.done()) {
        auto filter = r.str();
        s.filters.emplace_back(std::move(filter), r.u8());
      }
      return s;
    }
    case PacketType::Suback: {
      Suback s;
      s.packet_id = r.u16();
      while (!r.done()) s.return_codes.push_back(r.u8());
      return s;
    }
    case PacketType::Pingreq: return Pingreq{};
    case PacketType::Pingresp: return Pingresp{};
    case PacketType::Disconnect: return Disconnect{};
  }
  throw Error(ErrorCode::Parse, fmt::format("unsupported MQTT packet type {}", first >> 4));
}

}  // namespace

Bytes encode(const Packet& packet) { return std::visit(Encoder{}, packet); }

std::optional<Decoded> decode(std::span<const std::uint8_t> buffer) {
  if (buffer.size() < 2) return std::nullopt;
  std::size_t len = 0;
  std::size_t multiplier = 1;
  std::size_t i = 1;
  while (true) {
    if (i >= buffer.size()) return std::nullopt;
    if (i > 4) throw Error(ErrorCode::Parse, "MQTT remaining length too long");
    const auto b = buffer[i++];
    len += (b & 0x7F) * multiplier;
    multiplier *= 128;
    if ((b & 0x80) == 0) break;
  }
  if (buffer.size() - i < len) return std::nullopt;
  return Decoded{parse_body(buffer[0], buffer.subspan(i, len)), i + len};
}

bool topic_matches(std::string_view filter, std::string_view topic) {
  while (true) {
    const auto fs = filter.find('/');
    const auto ts = topic.find('/');
    const auto flevel = filter.substr(0, fs);
    const auto tlevel = topic.substr(0, ts);
    if (flevel == "#") return true;
    if (flevel != "+" && flevel != tlevel) return false;
    if (fs == std::string_view::npos || ts == std::string_view::npos) {
      if (fs == std::string_view::npos && ts == std::string_view::npos) return true;
      // "a/#" also matches "a"
      return ts == std::string_view::npos && filter.substr(fs + 1) == "#";
    }
    filter.remove_prefix(fs + 1);
    topic.remove_prefix(ts + 1);
  }
}

}  // namespace fieldpod::mqtt
