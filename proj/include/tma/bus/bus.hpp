#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tma/bus/envelope.hpp"

namespace tma::bus {

class BusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The transport is gone (broker closed the connection, socket error).
class DisconnectedError : public BusError {
 public:
  using BusError::BusError;
};

struct TopicQos {
  enum class Kind { kLossless, kKeepLast };
  Kind kind = Kind::kLossless;
  std::size_t depth = 0;  // keep_last N; unused for lossless

  static TopicQos lossless() { return {}; }
  /// Throws std::invalid_argument for n == 0.
  static TopicQos keep_last(std::size_t n);

  bool is_lossless() const { return kind == Kind::kLossless; }
  bool operator==(const TopicQos&) const = default;
};

/// "lossless" or "keep_last:N".
TopicQos parse_qos(std::string_view text);
std::string to_string(const TopicQos& qos);

/// keep_last(1) for camera topics, lossless for everything else.
TopicQos default_qos(std::string_view topic);

/// User topics must be valid and must not start with '$' (reserved for the
/// transport's control messages).
void check_user_topic(std::string_view topic);

/// Delivery queue behind one subscription. keep_last drops the oldest entry
/// once `depth` envelopes are waiting.
class Mailbox {
 public:
  explicit Mailbox(TopicQos qos) : qos_(qos) {}

  /// Returns false if the mailbox is closed and the envelope was discarded.
  bool push(Envelope envelope);
  /// Waits up to `timeout`. nullopt on timeout or after close(). Throws
  /// DisconnectedError once the transport is lost and the queue is drained.
  std::optional<Envelope> pop(std::chrono::milliseconds timeout);
  void close();
  void mark_disconnected();

  bool closed() const;
  std::size_t pending() const;
  std::size_t dropped() const;
  const TopicQos& qos() const { return qos_; }

 private:
  TopicQos qos_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Envelope> queue_;
  std::size_t dropped_ = 0;
  bool closed_ = false;
  bool disconnected_ = false;
};

/// Handle returned by subscribe(). Move-only; closes itself on destruction.
class Subscription {
 public:
  Subscription() = default;
  Subscription(std::string topic, std::shared_ptr<Mailbox> mailbox, std::function<void()> on_close);
  Subscription(Subscription&&) noexcept = default;
  Subscription& operator=(Subscription&& other) noexcept;
  Subscription(const Subscription&) = delete;
  Subscription& operator=(const Subscription&) = delete;
  ~Subscription();

  const std::string& topic() const { return topic_; }
  std::optional<Envelope> receive(std::chrono::milliseconds timeout);
  std::optional<Envelope> try_receive() { return receive(std::chrono::milliseconds(0)); }
  void close();
  bool valid() const { return mailbox_ != nullptr; }
  std::size_t pending() const { return mailbox_ ? mailbox_->pending() : 0; }
  std::size_t dropped() const { return mailbox_ ? mailbox_->dropped() : 0; }

 private:
  std::string topic_;
  std::shared_ptr<Mailbox> mailbox_;
  std::function<void()> on_close_;
};

/// A connection to some bus. seq numbers are assigned per (connection, topic)
/// starting at 0. publish() may be called from several threads.
class Bus {
 public:
  virtual ~Bus() = default;
  /// Returns the envelope as sent (with its seq).
  virtual Envelope publish(std::string_view topic, std::span<const std::uint8_t> payload,
                           std::uint64_t timestamp_ns) = 0;
  virtual Subscription subscribe(std::string_view topic, TopicQos qos) = 0;
  Subscription subscribe(std::string_view topic) { return subscribe(topic, default_qos(topic)); }
};

}  // namespace tma::bus
