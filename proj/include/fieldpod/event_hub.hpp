#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fieldpod/clock.hpp"

namespace fieldpod {

/// One update on the live stream: {"topic","payload","ts"}.
struct StreamEvent {
  std::string topic;
  std::string payload;
  std::string ts;  // ISO-8601 UTC

  bool operator==(const StreamEvent&) const = default;
};

std::string to_json(const StreamEvent& event);

/// Fan-out of stream events to any number of subscribers. Slow subscribers
/// lose their oldest events once `capacity` is queued.
class EventHub {
 public:
  class Subscription {
   public:
    /// Next event, or nullopt on timeout or after the hub closed.
    std::optional<StreamEvent> next(Duration timeout);
    bool closed() const;

   private:
    friend class EventHub;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<StreamEvent> queue_;
    bool closed_ = false;
  };

  explicit EventHub(std::size_t capacity = 256) : capacity_(capacity) {}
  ~EventHub() { close(); }

  std::shared_ptr<Subscription> subscribe();
  void publish(const StreamEvent& event);
  void close();
  std::size_t subscribers() const;

 private:
  void prune();

  std::size_t capacity_;
  mutable std::mutex mu_;
  std::vector<std::weak_ptr<Subscription>> subs_;
  bool closed_ = false;
};

}  // namespace fieldpod
