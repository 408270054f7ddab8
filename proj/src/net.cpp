#include "fieldpod/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include <fmt/format.h>

#include "fieldpod/error.hpp"

namespace fieldpod::net {

namespace {

int poll_ms(Duration d) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(d).count();
  return ms < 0 ? 0 : static_cast<int>(ms);
}

[[noreturn]] void transport(std::string what) { throw Error(ErrorCode::Transport, std::move(what)); }

}  // namespace

HostPort HostPort::parse(std::string_view text, std::string_view field) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw Error(ErrorCode::Configuration,
                fmt::format("{} '{}' must be host:port", field, text), std::string(field));
  }
  unsigned port = 0;
  const auto p = text.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), port);
  if (ec != std::errc{} || ptr != p.data() + p.size() || port > 65535) {
    throw Error(ErrorCode::Configuration, fmt::format("{} has a bad port '{}'", field, p),
                std::string(field));
  }
  return HostPort{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

void Socket::reset() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Socket connect_tcp(const HostPort& address, Duration timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto port = std::to_string(address.port);
  if (const int rc = ::getaddrinfo(address.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    transport(fmt::format("cannot resolve {}: {}", address.host, ::gai_strerror(rc)));
  }
  std::string last_error = "no address";
  for (auto* ai = res; ai; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol));
    if (!s.valid()) continue;
    int rc = ::connect(s.fd(), ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pfd{s.fd(), POLLOUT, 0};
      rc = ::poll(&pfd, 1, poll_ms(timeout));
      if (rc == 0) {
        last_error = "connect timed out";
        continue;
      }
      int err = 0;
      socklen_t len = sizeof err;
      ::getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
      if (rc < 0 || err != 0) {
        last_error = std::strerror(err ? err : errno);
        continue;
      }
    } else if (rc != 0) {
      last_error = std::strerror(errno);
      continue;
    }
    int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    ::freeaddrinfo(res);
    return s;
  }
  ::freeaddrinfo(res);
  transport(fmt::format("cannot connect to {}: {}", address.str(), last_error));
}

Socket listen_tcp(const std::string& host, std::uint16_t port) {
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0));
  if (!s.valid()) transport("socket() failed");
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorCode::Configuration, "listen host must be an IPv4 address", "host");
  }
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    transport(fmt::format("bind {}:{} failed: {}", host, port, std::strerror(errno)));
  }
  if (::listen(s.fd(), 16) != 0) transport("listen() failed");
  return s;
}

std::uint16_t local_port(const Socket& socket) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(socket.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

void send_all(const Socket& socket, std::span<const std::uint8_t> bytes, Duration timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (!bytes.empty()) {
    const ssize_t n = ::send(socket.fd(), bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n > 0) {
      bytes = bytes.subspan(static_cast<std::size_t>(n));
      continue;
    }
    if (n < 0 && errno == EINTR) continue;
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
      pollfd pfd{socket.fd(), POLLOUT, 0};
      const auto left = deadline - std::chrono::steady_clock::now();
      if (left <= Duration::zero() || ::poll(&pfd, 1, poll_ms(left)) <= 0) transport("send timed out");
      continue;
    }
    transport(fmt::format("send failed: {}", std::strerror(errno)));
  }
}

std::size_t recv_some(const Socket& socket, std::span<std::uint8_t> buffer, Duration timeout) {
  pollfd pfd{socket.fd(), POLLIN, 0};
  int rc;
  do {
    rc = ::poll(&pfd, 1, poll_ms(timeout));
  } while (rc < 0 && errno == EINTR);
  if (rc < 0) transport(fmt::format("poll failed: {}", std::strerror(errno)));
  if (rc == 0) return 0;
  const ssize_t n = ::recv(socket.fd(), buffer.data(), buffer.size(), 0);
  if (n == 0) transport("connection closed by peer");
  if (n < 0) {
    if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) return 0;
    transport(fmt::format("recv failed: {}", std::strerror(errno)));
  }
  return static_cast<std::size_t>(n);
}

}  // namespace fieldpod::net
