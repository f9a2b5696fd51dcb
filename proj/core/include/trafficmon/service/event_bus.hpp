#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace trafficmon::service {

struct Event {
  std::uint64_t seq = 0;
  std::string type;  // status_delta | anomaly_alert | count_tick
  std::string camera_id;
  std::string data;  // JSON document
};

// Bounded per-subscriber queue. A full queue drops its oldest event, so a
// slow reader never blocks publishers.
class Subscription {
 public:
  explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

  std::optional<Event> pop(std::chrono::milliseconds timeout);
  std::optional<Event> try_pop();
  std::uint64_t dropped() const;
  void close();
  bool closed() const;

 private:
  friend class EventBus;
  void push(const Event& ev);

  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<Event> queue_;
  std::uint64_t dropped_ = 0;
  bool closed_ = false;
};

class EventBus {
 public:
  explicit EventBus(std::size_t default_capacity = 1024) : default_capacity_(default_capacity) {}

  std::uint64_t publish(std::string type, std::string camera_id, std::string data);
  std::shared_ptr<Subscription> subscribe(std::optional<std::size_t> capacity = std::nullopt);
  void unsubscribe(const std::shared_ptr<Subscription>& sub);
  std::size_t subscriber_count() const;
  // Closes every subscription (used on shutdown).
  void close_all();

 private:
  std::size_t default_capacity_;
  mutable std::mutex mutex_;
  std::uint64_t next_seq_ = 1;
  std::vector<std::shared_ptr<Subscription>> subscribers_;
};

}  // namespace trafficmon::service
