#include "tma/bus/bus.hpp"

#include <charconv>

#include <fmt/format.h>

namespace tma::bus {

TopicQos TopicQos::keep_last(std::size_t n) {
  if (n == 0) throw std::invalid_argument("keep_last depth must be at least 1");
  return TopicQos{Kind::kKeepLast, n};
}

TopicQos parse_qos(std::string_view text) {
  if (text == "lossless") return TopicQos::lossless();
  constexpr std::string_view prefix = "keep_last:";
  if (text.starts_with(prefix)) {
    const auto digits = text.substr(prefix.size());
    std::size_t n = 0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec == std::errc() && end == digits.data() + digits.size() && n > 0) {
      return TopicQos::keep_last(n);
    }
  }
  throw std::invalid_argument(fmt::format("bad QoS '{}' (expected lossless or keep_last:N)", text));
}

std::string to_string(const TopicQos& qos) {
  return qos.is_lossless() ? std::string("lossless") : fmt::format("keep_last:{}", qos.depth);
}

TopicQos default_qos(std::string_view topic) {
  return topic.starts_with("/camera/") ? TopicQos::keep_last(1) : TopicQos::lossless();
}

void check_user_topic(std::string_view topic) {
  if (!is_valid_topic(topic)) throw std::invalid_argument(fmt::format("invalid topic '{}'", topic));
  if (topic.front() == '$') {
    throw std::invalid_argument(fmt::format("topic '{}' uses the reserved '$' prefix", topic));
  }
}

bool Mailbox::push(Envelope envelope) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return false;
    if (!qos_.is_lossless() && queue_.size() >= qos_.depth) {
      queue_.pop_front();
      ++dropped_;
    }
    queue_.push_back(std::move(envelope));
  }
  cv_.notify_one();
  return true;
}

std::optional<Envelope> Mailbox::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || disconnected_ || !queue_.empty(); });
  if (closed_) return std::nullopt;
  if (!queue_.empty()) {
    Envelope e = std::move(queue_.front());
    queue_.pop_front();
    return e;
  }
  if (disconnected_) throw DisconnectedError("bus connection lost");
  return std::nullopt;
}

void Mailbox::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
    queue_.clear();
  }
  cv_.notify_all();
}

void Mailbox::mark_disconnected() {
  {
    std::lock_guard lock(mu_);
    disconnected_ = true;
  }
  cv_.notify_all();
}

bool Mailbox::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

std::size_t Mailbox::pending() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

std::size_t Mailbox::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

Subscription::Subscription(std::string topic, std::shared_ptr<Mailbox> mailbox,
                           std::function<void()> on_close)
    : topic_(std::move(topic)), mailbox_(std::move(mailbox)), on_close_(std::move(on_close)) {}

Subscription& Subscription::operator=(Subscription&& other) noexcept {
  if (this != &other) {
    close();
    topic_ = std::move(other.topic_);
    mailbox_ = std::move(other.mailbox_);
    on_close_ = std::move(other.on_close_);
  }
  return *this;
}

Subscription::~Subscription() { close(); }

std::optional<Envelope> Subscription::receive(std::chrono::milliseconds timeout) {
  if (!mailbox_) return std::nullopt;
  return mailbox_->pop(timeout);
}

void Subscription::close() {
  if (!mailbox_) return;
  mailbox_->close();
  mailbox_.reset();
  if (on_close_) {
    auto callback = std::move(on_close_);
    on_close_ = nullptr;
    try {
      callback();
    } catch (...) {
      // Unsubscribing from a dead transport is not an error for the caller.
    }
  }
}

}  // namespace tma::bus
