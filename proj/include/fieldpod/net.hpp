#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "fieldpod/clock.hpp"

namespace fieldpod::net {

struct HostPort {
  std::string host;
  std::uint16_t port = 0;

  /// "host:port"; throws Error(Configuration) naming `field`.
  static HostPort parse(std::string_view text, std::string_view field = "broker_address");
  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Owning TCP socket handle.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { reset(); }
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() noexcept;

 private:
  int fd_ = -1;
};

/// Throws Error(Transport) on resolution failure, refusal or timeout.
Socket connect_tcp(const HostPort& address, Duration timeout);
/// Listens on 127.0.0.1 (or the given host); port 0 picks an ephemeral port.
Socket listen_tcp(const std::string& host, std::uint16_t port);
std::uint16_t local_port(const Socket& socket);

void send_all(const Socket& socket, std::span<const std::uint8_t> bytes, Duration timeout);
/// Reads what is available within `timeout`. Returns 0 on timeout; throws
/// Error(Transport) when the peer closed or the read failed.
std::size_t recv_some(const Socket& socket, std::span<std::uint8_t> buffer, Duration timeout);

}  // namespace fieldpod::net
