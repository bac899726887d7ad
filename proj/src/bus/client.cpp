#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "bus/control.hpp"
#include "bus/socket.hpp"
#include "tma/bus/tcp.hpp"

namespace tma::bus {
namespace {
constexpr auto kSubackTimeout = std::chrono::seconds(10);
constexpr int kCloseDrainMs = 2000;
}  // namespace

TcpClient::TcpClient(const Endpoint& broker, RetryPolicy retry) {
  auto delay = retry.initial_delay;
  const int attempts = std::max(1, retry.attempts);
  for (int attempt = 1;; ++attempt) {
    try {
      fd_ = detail::connect_tcp(broker.host, broker.port);
      break;
    } catch (const BusError& e) {
      if (attempt >= attempts) {
        throw BusError(fmt::format("broker {} unreachable after {} attempts: {}", broker.to_string(),
                                   attempts, e.what()));
      }
      spdlog::debug("connect attempt {} failed ({}), retrying in {} ms", attempt, e.what(), delay.count());
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(static_cast<long>(static_cast<double>(delay.count()) * retry.multiplier));
    }
  }
  reader_ = std::thread([this] { reader_loop(); });
}

TcpClient::~TcpClient() { close(); }

void TcpClient::close() {
  if (closed_.exchange(true)) return;
  ::shutdown(fd_, SHUT_WR);
  // The reader sees EOF once the broker has flushed and closed its side.
  if (reader_.joinable()) {
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(kCloseDrainMs);
    while (!disconnected_.load() && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    ::shutdown(fd_, SHUT_RDWR);
    reader_.join();
  }
  ::close(fd_);
  fd_ = -1;
  *alive_ = false;
}

void TcpClient::send_frame(const std::vector<std::uint8_t>& frame) {
  if (closed_.load() || disconnected_.load() || !detail::send_all(fd_, frame)) {
    disconnected_.store(true);
    throw DisconnectedError("bus connection lost");
  }
}

Envelope TcpClient::publish(std::string_view topic, std::span<const std::uint8_t> payload,
                            std::uint64_t timestamp_ns) {
  check_user_topic(topic);
  std::lock_guard lock(send_mu_);
  auto it = next_seq_.find(topic);
  if (it == next_seq_.end()) it = next_seq_.emplace(std::string(topic), 0).first;
  Envelope e{std::string(topic), it->second, timestamp_ns, {payload.begin(), payload.end()}};
  send_frame(encode_envelope(e));
  ++it->second;
  return e;
}

Subscription TcpClient::subscribe(std::string_view topic, TopicQos qos) {
  check_user_topic(topic);
  auto mailbox = std::make_shared<Mailbox>(qos);
  std::uint32_t id = 0;
  {
    std::lock_guard lock(subs_mu_);
    if (disconnected_.load()) throw DisconnectedError("bus connection lost");
    id = next_request_id_++;
    subs_[id] = LocalSub{std::string(topic), mailbox, false};
  }
  const Envelope request{detail::kSubscribeTopic, 0, 0,
                         detail::encode_subscribe({id, qos, std::string(topic)})};
  {
    std::lock_guard lock(send_mu_);
    send_frame(encode_envelope(request));
  }
  {
    std::unique_lock lock(subs_mu_);
    const bool acked = subs_cv_.wait_for(lock, kSubackTimeout, [&] {
      return disconnected_.load() || subs_.at(id).active;
    });
    if (!acked || !subs_.at(id).active) {
      subs_.erase(id);
      if (disconnected_.load()) throw DisconnectedError("bus connection lost while subscribing");
      throw BusError(fmt::format("no subscription acknowledgement for '{}'", topic));
    }
  }
  std::weak_ptr<bool> alive = alive_;
  return Subscription(std::string(topic), mailbox, [this, alive, id] {
    if (auto a = alive.lock(); a && *a) unsubscribe(id);
  });
}

void TcpClient::unsubscribe(std::uint32_t id) {
  {
    std::lock_guard lock(subs_mu_);
    subs_.erase(id);
  }
  if (closed_.load() || disconnected_.load()) return;
  const Envelope request{detail::kUnsubscribeTopic, 0, 0, detail::encode_id(id)};
  std::lock_guard lock(send_mu_);
  send_frame(encode_envelope(request));
}

void TcpClient::reader_loop() {
  FrameAssembler assembler;
  std::array<std::uint8_t, 64 * 1024> buffer{};
  try {
    for (;;) {
      const long n = detail::recv_some(fd_, buffer.data(), buffer.size());
      if (n <= 0) break;
      assembler.feed(std::span(buffer.data(), static_cast<std::size_t>(n)));
      while (auto frame = assembler.next_frame()) {
        Envelope e = decode_envelope(*frame);
        std::lock_guard lock(subs_mu_);
        if (e.topic == detail::kSubackTopic) {
          detail::Suback ack = detail::decode_suback(e.payload);
          auto it = subs_.find(ack.id);
          if (it == subs_.end()) continue;
          if (ack.retained) it->second.mailbox->push(std::move(*ack.retained));
          it->second.active = true;
          subs_cv_.notify_all();
          continue;
        }
        for (auto& [id, sub] : subs_) {
          if (sub.active && sub.topic == e.topic) sub.mailbox->push(e);
        }
      }
    }
  } catch (const std::exception& ex) {
    spdlog::warn("bus client: closing connection after bad frame from broker: {}", ex.what());
  }
  std::lock_guard lock(subs_mu_);
  disconnected_.store(true);
  for (auto& [id, sub] : subs_) sub.mailbox->mark_disconnected();
  subs_cv_.notify_all();
}

}  // namespace tma::bus
