#pragma once

// Bounded hand-off queue between pipeline stages, and the fan-out used for
// the UI message channel. Envelopes are {"type", "seq", "payload"}.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace aeroselect {

template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  // Blocks while full. Returns false if the queue was closed.
  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  // Blocks while empty. Returns nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  std::size_t capacity_;
  bool closed_ = false;
};

// One subscriber's mailbox. When full, the oldest message is dropped so a
// stalled reader never blocks the publisher.
class Subscription {
 public:
  explicit Subscription(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  std::optional<std::string> next(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [&] { return closed_ || !messages_.empty(); });
    if (messages_.empty()) return std::nullopt;
    std::string m = std::move(messages_.front());
    messages_.pop_front();
    return m;
  }

  void deliver(const std::string& message) {
    std::lock_guard lock(mu_);
    if (closed_) return;
    if (messages_.size() >= capacity_) {
      messages_.pop_front();
      ++dropped_;
    }
    messages_.push_back(message);
    cv_.notify_one();
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }

  std::uint64_t dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> messages_;
  std::size_t capacity_;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

class Broadcaster {
 public:
  std::shared_ptr<Subscription> subscribe(std::size_t capacity = 4096) {
    auto sub = std::make_shared<Subscription>(capacity);
    std::lock_guard lock(mu_);
    subscribers_.push_back(sub);
    return sub;
  }

  // Every live subscriber receives the same serialized envelope.
  std::uint64_t publish(std::string_view type, nlohmann::json payload) {
    std::lock_guard lock(mu_);
    const std::uint64_t seq = next_seq_++;
    const std::string message =
        nlohmann::json{{"type", type}, {"seq", seq}, {"payload", std::move(payload)}}.dump();
    std::erase_if(subscribers_, [&](const std::weak_ptr<Subscription>& w) {
      auto sub = w.lock();
      if (!sub || sub->closed()) return true;
      sub->deliver(message);
      return false;
    });
    return seq;
  }

  void close_all() {
    std::lock_guard lock(mu_);
    for (auto& w : subscribers_) {
      if (auto sub = w.lock()) sub->close();
    }
    subscribers_.clear();
  }

  std::size_t subscriber_count() {
    std::lock_guard lock(mu_);
    std::erase_if(subscribers_, [](const std::weak_ptr<Subscription>& w) { return w.expired(); });
    return subscribers_.size();
  }

 private:
  std::mutex mu_;
  std::vector<std::weak_ptr<Subscription>> subscribers_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace aeroselect
