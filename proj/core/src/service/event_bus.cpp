#include "trafficmon/service/event_bus.hpp"

#include <algorithm>

namespace trafficmon::service {

void Subscription::push(const Event& ev) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    if (queue_.size() >= capacity_) {
      queue_.pop_front();
      ++dropped_;
    }
    queue_.push_back(ev);
  }
  cv_.notify_one();
}

std::optional<Event> Subscription::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [this] { return !queue_.empty() || closed_; });
  if (queue_.empty()) return std::nullopt;
  Event ev = std::move(queue_.front());
  queue_.pop_front();
  return ev;
}

std::optional<Event> Subscription::try_pop() { return pop(std::chrono::milliseconds(0)); }

std::uint64_t Subscription::dropped() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

void Subscription::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::uint64_t EventBus::publish(std::string type, std::string camera_id, std::string data) {
  std::lock_guard lock(mutex_);
  Event ev{next_seq_++, std::move(type), std::move(camera_id), std::move(data)};
  for (const auto& sub : subscribers_) sub->push(ev);
  return ev.seq;
}

std::shared_ptr<Subscription> EventBus::subscribe(std::optional<std::size_t> capacity) {
  auto sub = std::make_shared<Subscription>(std::max<std::size_t>(1, capacity.value_or(default_capacity_)));
  std::lock_guard lock(mutex_);
  subscribers_.push_back(sub);
  return sub;
}

void EventBus::unsubscribe(const std::shared_ptr<Subscription>& sub) {
  sub->close();
  std::lock_guard lock(mutex_);
  std::erase(subscribers_, sub);
}

std::size_t EventBus::subscriber_count() const {
  std::lock_guard lock(mutex_);
  return subscribers_.size();
}

void EventBus::close_all() {
  std::lock_guard lock(mutex_);
  for (const auto& sub : subscribers_) sub->close();
  subscribers_.clear();
}

}  // namespace trafficmon::service
