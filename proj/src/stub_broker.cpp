#include "fieldpod/stub_broker.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>

#include <spdlog/spdlog.h>

#include "fieldpod/error.hpp"
#include "fieldpod/mqtt.hpp"

namespace fieldpod {

struct StubBroker::Client {
  net::Socket socket;
  std::vector<std::uint8_t> rx;
  std::string client_id;
  std::vector<std::string> filters;
  bool connected = false;  // CONNECT seen
  bool closing = false;
};

StubBroker::StubBroker(std::uint16_t port) {
  listener_ = net::listen_tcp("127.0.0.1", port);
  port_ = net::local_port(listener_);
  if (::pipe2(wake_pipe_, O_CLOEXEC | O_NONBLOCK) != 0) {
    throw Error(ErrorCode::Transport, "pipe2 failed");
  }
  thread_ = std::thread([this] { run(); });
}

StubBroker::~StubBroker() {
  stop_ = true;
  wake();
  if (thread_.joinable()) thread_.join();
  ::close(wake_pipe_[0]);
  ::close(wake_pipe_[1]);
}

void StubBroker::wake() {
  const char b = 1;
  [[maybe_unused]] auto n = ::write(wake_pipe_[1], &b, 1);
}

std::vector<StubBroker::LoggedPublish> StubBroker::log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

void StubBroker::clear_log() {
  std::lock_guard lock(mutex_);
  log_.clear();
}

std::optional<std::string> StubBroker::retained(const std::string& topic) const {
  std::lock_guard lock(mutex_);
  if (auto it = retained_.find(topic); it != retained_.end()) return it->second;
  return std::nullopt;
}

std::size_t StubBroker::active_clients() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& c : clients_) n += c->connected && !c->closing;
  return n;
}

void StubBroker::set_available(bool available) {
  {
    std::lock_guard lock(mutex_);
    available_ = available;
  }
  wake();
}

void StubBroker::fail_after_publishes(std::size_t n) {
  std::lock_guard lock(mutex_);
  fail_after_ = n;
}

void StubBroker::drop_on_next_publish_first_byte() {
  std::lock_guard lock(mutex_);
  drop_first_byte_ = true;
}

void StubBroker::suppress_acks(bool suppress) {
  std::lock_guard lock(mutex_);
  suppress_acks_ = suppress;
}

void StubBroker::inject(const std::string& topic, const std::string& payload, bool retain) {
  {
    std::lock_guard lock(mutex_);
    injected_.emplace_back(topic, payload);
    if (retain) retained_[topic] = payload;
  }
  wake();
}

bool StubBroker::wait_for(const std::function<bool(const std::vector<LoggedPublish>&)>& pred,
                          Duration timeout) const {
  std::unique_lock lock(mutex_);
  return changed_.wait_for(lock, timeout, [&] { return pred(log_); });
}

void StubBroker::send_to(Client& c, const std::vector<std::uint8_t>& bytes) {
  if (c.closing) return;
  try {
    net::send_all(c.socket, bytes, std::chrono::seconds{1});
  } catch (const Error&) {
    c.closing = true;
  }
}

void StubBroker::close_client(Client& c) { c.closing = true; }

// Caller holds mutex_.
void StubBroker::deliver(const std::string& topic, const std::string& payload, bool retain) {
  for (auto& other : clients_) {
    if (!other->connected || other->closing) continue;
    for (const auto& f : other->filters) {
      if (mqtt::topic_matches(f, topic)) {
        send_to(*other, mqtt::encode(mqtt::Publish{topic, payload, 0, retain, false, 0}));
        break;
      }
    }
  }
}

void StubBroker::handle_readable(Client& c) {
  std::array<std::uint8_t, 4096> buf;
  const ssize_t n = ::recv(c.socket.fd(), buf.data(), buf.size(), 0);
  if (n <= 0) {
    if (n < 0 && (errno == EAGAIN || errno == EINTR)) return;
    close_client(c);
    return;
  }
  c.rx.insert(c.rx.end(), buf.begin(), buf.begin() + n);

  std::lock_guard lock(mutex_);
  if (!available_) {
    close_client(c);
    return;
  }
  while (!c.closing && !c.rx.empty()) {
    if ((c.rx[0] >> 4) == static_cast<int>(mqtt::PacketType::Publish) && drop_first_byte_) {
      drop_first_byte_ = false;
      spdlog::debug("stub broker: dropping '{}' mid-publish (scripted)", c.client_id);
      close_client(c);
      return;
    }
    std::optional<mqtt::Decoded> d;
    try {
      d = mqtt::decode(c.rx);
    } catch (const Error&) {
      close_client(c);
      return;
    }
    if (!d) return;
    c.rx.erase(c.rx.begin(), c.rx.begin() + static_cast<std::ptrdiff_t>(d->consumed));

    if (const auto* con = std::get_if<mqtt::Connect>(&d->packet)) {
      c.client_id = con->client_id;
      c.connected = true;
      send_to(c, mqtt::encode(mqtt::Connack{false, 0}));
    } else if (!c.connected) {
      close_client(c);
    } else if (const auto* pub = std::get_if<mqtt::Publish>(&d->packet)) {
      if (fail_after_) {
        if (*fail_after_ == 0) {
          fail_after_.reset();
          spdlog::debug("stub broker: dropping '{}' on publish (scripted)", c.client_id);
          close_client(c);
          return;
        }
        --*fail_after_;
      }
      log_.push_back({c.client_id, pub->topic, pub->payload, pub->qos, pub->retain});
      if (pub->retain) retained_[pub->topic] = pub->payload;
      changed_.notify_all();
      if (pub->qos == 1 && !suppress_acks_) send_to(c, mqtt::encode(mqtt::Puback{pub->packet_id}));
      deliver(pub->topic, pub->payload, false);
    } else if (const auto* sub = std::get_if<mqtt::Subscribe>(&d->packet)) {
      mqtt::Suback ack{sub->packet_id, {}};
      for (const auto& [filter, qos] : sub->filters) {
        c.filters.push_back(filter);
        ack.return_codes.push_back(0);
      }
      send_to(c, mqtt::encode(ack));
      for (const auto& [filter, qos] : sub->filters) {
        for (const auto& [topic, payload] : retained_) {
          if (mqtt::topic_matches(filter, topic)) {
            send_to(c, mqtt::encode(mqtt::Publish{topic, payload, 0, true, false, 0}));
          }
        }
      }
    } else if (std::holds_alternative<mqtt::Pingreq>(d->packet)) {
      send_to(c, mqtt::encode(mqtt::Pingresp{}));
    } else if (std::holds_alternative<mqtt::Disconnect>(d->packet)) {
      close_client(c);
    }
  }
}

void StubBroker::run() {
  while (!stop_) {
    std::vector<pollfd> fds;
    fds.push_back({listener_.fd(), POLLIN, 0});
    fds.push_back({wake_pipe_[0], POLLIN, 0});
    std::vector<Client*> polled;
    {
      std::lock_guard lock(mutex_);
      for (auto& c : clients_) {
        fds.push_back({c->socket.fd(), POLLIN, 0});
        polled.push_back(c.get());
      }
    }
    if (::poll(fds.data(), fds.size(), 200) < 0 && errno != EINTR) break;

    if (fds[1].revents & POLLIN) {
      char drain[64];
      while (::read(wake_pipe_[0], drain, sizeof drain) > 0) {
      }
    }
    if (fds[0].revents & POLLIN) {
      while (true) {
        const int fd = ::accept4(listener_.fd(), nullptr, nullptr, SOCK_CLOEXEC | SOCK_NONBLOCK);
        if (fd < 0) break;
        ++accepted_;
        auto c = std::make_unique<Client>();
        c->socket = net::Socket(fd);
        std::lock_guard lock(mutex_);
        if (!available_) continue;  // socket closes on scope exit
        clients_.push_back(std::move(c));
      }
    }
    for (std::size_t i = 0; i < polled.size(); ++i) {
      if (fds[i + 2].revents & (POLLIN | POLLHUP | POLLERR)) handle_readable(*polled[i]);
    }

    std::lock_guard lock(mutex_);
    for (auto& [topic, payload] : injected_) deliver(topic, payload, false);
    injected_.clear();
    if (!available_) {
      for (auto& c : clients_) c->closing = true;
    }
    std::erase_if(clients_, [](const auto& c) { return c->closing; });
  }
}

}  // namespace fieldpod
