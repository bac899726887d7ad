#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tma/bus/bus.hpp"

namespace tma::bus {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  std::string to_string() const;
  bool operator==(const Endpoint&) const = default;
};

/// Parses "host:port". Throws std::invalid_argument.
Endpoint parse_endpoint(std::string_view text);

/// Initial connect attempts with exponential backoff between them.
struct RetryPolicy {
  int attempts = 5;
  std::chrono::milliseconds initial_delay{100};
  double multiplier = 2.0;
};

/// Star-topology router. Clients publish framed envelopes; the broker
/// forwards each one to every connection holding a subscription to that
/// exact topic and keeps the latest envelope per topic for late keep_last
/// subscribers. A connection that sends a malformed frame is dropped.
class Broker {
 public:
  /// Binds and starts accepting immediately. Port 0 picks a free port.
  /// Throws BusError when the address cannot be bound.
  explicit Broker(const Endpoint& listen);
  ~Broker();
  Broker(const Broker&) = delete;
  Broker& operator=(const Broker&) = delete;

  std::uint16_t port() const { return port_; }
  void stop();
  std::size_t connection_count() const;
  std::uint64_t dropped_connections() const { return dropped_connections_.load(); }

 private:
  struct Connection;
  struct Outgoing;

  void accept_loop();
  void reader_loop(const std::shared_ptr<Connection>& conn);
  static void writer_loop(const std::shared_ptr<Connection>& conn);
  void handle_frame(const std::shared_ptr<Connection>& conn, std::vector<std::uint8_t> frame);
  void reap(bool all);

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;

  mutable std::mutex mu_;
  std::vector<std::shared_ptr<Connection>> connections_;
  std::map<std::string, std::shared_ptr<const std::vector<std::uint8_t>>, std::less<>> retained_;
  std::atomic<std::uint64_t> dropped_connections_{0};
};

/// Client connection to a Broker. Subscriptions are active at the broker
/// when subscribe() returns.
class TcpClient final : public Bus {
 public:
  explicit TcpClient(const Endpoint& broker, RetryPolicy retry = {});
  ~TcpClient() override;
  TcpClient(const TcpClient&) = delete;
  TcpClient& operator=(const TcpClient&) = delete;

  Envelope publish(std::string_view topic, std::span<const std::uint8_t> payload,
                   std::uint64_t timestamp_ns) override;
  using Bus::subscribe;
  Subscription subscribe(std::string_view topic, TopicQos qos) override;

  /// Half-closes, waits for the broker to finish with the connection, and
  /// releases it. Called by the destructor.
  void close();
  bool connected() const { return !disconnected_.load(); }

 private:
  struct LocalSub {
    std::string topic;
    std::shared_ptr<Mailbox> mailbox;
    bool active = false;
  };

  void reader_loop();
  void send_frame(const std::vector<std::uint8_t>& frame);
  void unsubscribe(std::uint32_t id);

  int fd_ = -1;
  std::thread reader_;
  std::atomic<bool> disconnected_{false};
  std::atomic<bool> closed_{false};

  std::mutex send_mu_;
  std::map<std::string, std::uint64_t, std::less<>> next_seq_;

  std::mutex subs_mu_;
  std::condition_variable subs_cv_;
  std::map<std::uint32_t, LocalSub> subs_;
  std::uint32_t next_request_id_ = 1;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

}  // namespace tma::bus
