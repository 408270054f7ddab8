#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <type_traits>

#include "fieldpod/clock.hpp"
#include "fieldpod/error.hpp"

namespace fieldpod {

/// Serialized command channel into the control loop. Any thread may `call`;
/// only the loop thread runs the jobs, so the loop stays the sole mutator of
/// device state.
class ControlQueue {
 public:
  /// Runs `fn` on the loop thread and returns its result, rethrowing its
  /// exception. Throws Error(Transport) if the queue is closed or the loop
  /// does not get to the job within `timeout`.
  template <typename F>
  auto call(F fn, Duration timeout = std::chrono::seconds(5)) -> std::invoke_result_t<F> {
    using R = std::invoke_result_t<F>;
    auto task = std::make_shared<std::packaged_task<R()>>(std::move(fn));
    auto result = task->get_future();
    {
      std::lock_guard lock(mu_);
      if (closed_) throw Error(ErrorCode::Transport, "control loop is not running");
      jobs_.emplace_back([task] { (*task)(); });
    }
    cv_.notify_all();
    if (result.wait_for(timeout) != std::future_status::ready) {
      throw Error(ErrorCode::Transport, "control loop did not respond in time");
    }
    return result.get();
  }

  /// Runs every queued job; returns how many ran.
  std::size_t run_pending() {
    std::deque<std::function<void()>> batch;
    {
      std::lock_guard lock(mu_);
      batch.swap(jobs_);
    }
    for (auto& job : batch) job();
    return batch.size();
  }

  /// Blocks until a job is queued, the queue closes, or `timeout` passes.
  void wait_for(Duration timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !jobs_.empty(); });
  }

  /// Rejects new calls. Jobs already queued are dropped, which makes their
  /// callers time out or see a broken promise.
  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
      jobs_.clear();
    }
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  bool closed_ = false;
};

}  // namespace fieldpod
