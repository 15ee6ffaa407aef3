// Bounded MPSC mailbox: one event queue and one data queue per AC, a single
// lock and condition pair. Producers block when full (backpressure);
// consumers drain everything available in one grab.
#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>

#include "anydb/event.hpp"

namespace anydb {

class Mailbox {
 public:
  Mailbox(size_t event_cap, size_t data_cap) : event_cap_(event_cap), data_cap_(data_cap) {}

  // All push paths return false when the mailbox is closed (shutdown).
  bool push_event(Event&& e) {
    std::unique_lock lk(mu_);
    not_full_.wait(lk, [&] { return closed_ || events_.size() < event_cap_; });
    if (closed_) return false;
    events_.push_back(std::move(e));
    not_empty_.notify_one();
    return true;
  }

  // A block lands contiguously: wait for room for the whole block (or an
  // empty queue, so blocks larger than the capacity still make progress).
  bool push_events(std::vector<Event>&& es) {
    if (es.empty()) return true;
    std::unique_lock lk(mu_);
    not_full_.wait(lk, [&] {
      return closed_ || events_.size() + es.size() <= event_cap_ || events_.empty();
    });
    if (closed_) return false;
    for (Event& e : es) events_.push_back(std::move(e));
    not_empty_.notify_one();
    return true;
  }

  bool push_data(DataBatch&& b) {
    std::unique_lock lk(mu_);
    not_full_.wait(lk, [&] { return closed_ || data_.size() < data_cap_; });
    if (closed_) return false;
    data_.push_back(std::move(b));
    not_empty_.notify_one();
    return true;
  }

  enum class Drain { Got, Empty, Closed };

  // Non-blocking sweep of both queues into the out vectors.
  Drain try_drain(std::vector<Event>& ev, std::vector<DataBatch>& db) {
    std::unique_lock lk(mu_);
    return drain_locked(ev, db);
  }

  // Blocks until something arrives, the timeout passes, or close().
  template <typename Dur>
  Drain drain_wait(std::vector<Event>& ev, std::vector<DataBatch>& db, Dur timeout) {
    std::unique_lock lk(mu_);
    not_empty_.wait_for(lk, timeout, [&] { return closed_ || !events_.empty() || !data_.empty(); });
    return drain_locked(ev, db);
  }

  void close() {
    std::lock_guard lk(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  bool closed() const {
    std::lock_guard lk(mu_);
    return closed_;
  }

  size_t size() const {
    std::lock_guard lk(mu_);
    return events_.size() + data_.size();
  }

 private:
  Drain drain_locked(std::vector<Event>& ev, std::vector<DataBatch>& db) {
    if (events_.empty() && data_.empty()) return closed_ ? Drain::Closed : Drain::Empty;
    while (!events_.empty()) {
      ev.push_back(std::move(events_.front()));
      events_.pop_front();
    }
    while (!data_.empty()) {
      db.push_back(std::move(data_.front()));
      data_.pop_front();
    }
    not_full_.notify_all();
    return Drain::Got;
  }

  mutable std::mutex mu_;
  std::condition_variable not_empty_, not_full_;
  std::deque<Event> events_;
  std::deque<DataBatch> data_;
  size_t event_cap_, data_cap_;
  bool closed_ = false;
};

}  // namespace anydb
