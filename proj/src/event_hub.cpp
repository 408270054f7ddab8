#include "fieldpod/event_hub.hpp"

#include <algorithm>

#include <json.hpp>

namespace fieldpod {

std::string to_json(const StreamEvent& event) {
  return nlohmann::json{{"topic", event.topic}, {"payload", event.payload}, {"ts", event.ts}}.dump();
}

std::optional<StreamEvent> EventHub::Subscription::next(Duration timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  auto event = std::move(queue_.front());
  queue_.pop_front();
  return event;
}

bool EventHub::Subscription::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::shared_ptr<EventHub::Subscription> EventHub::subscribe() {
  auto sub = std::make_shared<Subscription>();
  std::lock_guard lock(mu_);
  if (closed_) {
    sub->closed_ = true;
  } else {
    prune();
    subs_.push_back(sub);
  }
  return sub;
}

void EventHub::publish(const StreamEvent& event) {
  std::lock_guard lock(mu_);
  for (auto& weak : subs_) {
    auto sub = weak.lock();
    if (!sub) continue;
    {
      std::lock_guard sub_lock(sub->mu_);
      if (sub->queue_.size() >= capacity_) sub->queue_.pop_front();
      sub->queue_.push_back(event);
    }
    sub->cv_.notify_all();
  }
}

void EventHub::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  for (auto& weak : subs_) {
    if (auto sub = weak.lock()) {
      {
        std::lock_guard sub_lock(sub->mu_);
        sub->closed_ = true;
      }
      sub->cv_.notify_all();
    }
  }
  subs_.clear();
}

std::size_t EventHub::subscribers() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(
      std::count_if(subs_.begin(), subs_.end(), [](const auto& w) { return !w.expired(); }));
}

void EventHub::prune() {
  subs_.erase(std::remove_if(subs_.begin(), subs_.end(), [](const auto& w) { return w.expired(); }), subs_.end());
}

}  // namespace fieldpod
