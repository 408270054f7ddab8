#pragma once

#include <atomic>
#include <chrono>

namespace fieldpod {

/// Monotonic instant. The epoch is whatever the clock chooses; only
/// differences are meaningful.
using Instant = std::chrono::time_point<std::chrono::steady_clock, std::chrono::nanoseconds>;
using Duration = std::chrono::nanoseconds;

inline Duration seconds_f(double s) {
  return std::chrono::duration_cast<Duration>(std::chrono::duration<double>(s));
}
inline double to_seconds(Duration d) { return std::chrono::duration<double>(d).count(); }

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Instant now() const = 0;
};

class SteadyClock final : public Clock {
 public:
  Instant now() const override { return std::chrono::steady_clock::now(); }
};

/// Virtual clock for tests: time moves only when advanced.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Instant start = Instant{}) : ns_(start.time_since_epoch().count()) {}
  Instant now() const override { return Instant{Duration{ns_.load()}}; }
  void advance(Duration d) { ns_ += d.count(); }
  void set(Instant t) { ns_ = t.time_since_epoch().count(); }

 private:
  std::atomic<Duration::rep> ns_;
};

}  // namespace fieldpod
