#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <deque>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "bus/control.hpp"
#include "bus/socket.hpp"
#include "tma/bus/tcp.hpp"

namespace tma::bus {

using Frame = std::shared_ptr<const std::vector<std::uint8_t>>;

struct Broker::Outgoing {
  Frame frame;
  std::string topic;
  std::size_t keep_last = 0;  // 0 = lossless
};

struct Broker::Connection {
  explicit Connection(int fd_in, std::uint64_t id_in) : fd(fd_in), id(id_in) {}
  ~Connection() {
    if (fd >= 0) ::close(fd);
  }

  int fd;
  std::uint64_t id;

  std::mutex queue_mu;
  std::condition_variable queue_cv;
  std::deque<Outgoing> queue;
  bool closing = false;
  bool sending = false;

  // Guarded by Broker::mu_.
  std::map<std::uint32_t, detail::SubscribeRequest> subscriptions;

  std::thread reader;
  std::thread writer;
  std::atomic<bool> done{false};

  void enqueue(Outgoing item) {
    {
      std::lock_guard lock(queue_mu);
      if (closing) return;
      if (item.keep_last > 0) {
        std::size_t queued = 0;
        for (const auto& q : queue) queued += q.topic == item.topic;
        for (auto it = queue.begin(); queued >= item.keep_last && it != queue.end();) {
          if (it->topic == item.topic) {
            it = queue.erase(it);
            --queued;
          } else {
            ++it;
          }
        }
      }
      queue.push_back(std::move(item));
    }
    queue_cv.notify_all();
  }

  void shut() {
    {
      std::lock_guard lock(queue_mu);
      closing = true;
      queue.clear();
    }
    queue_cv.notify_all();
    ::shutdown(fd, SHUT_RDWR);
  }
};

std::string Endpoint::to_string() const { return fmt::format("{}:{}", host, port); }

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw std::invalid_argument(fmt::format("bad address '{}' (expected host:port)", text));
  }
  unsigned port = 0;
  for (char c : text.substr(colon + 1)) {
    if (c < '0' || c > '9' || (port = port * 10 + static_cast<unsigned>(c - '0')) > 65535) {
      throw std::invalid_argument(fmt::format("bad port in '{}'", text));
    }
  }
  return Endpoint{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

Broker::Broker(const Endpoint& listen) {
  listen_fd_ = detail::listen_tcp(listen.host, listen.port, &port_);
  acceptor_ = std::thread([this] { accept_loop(); });
}

Broker::~Broker() { stop(); }

void Broker::stop() {
  if (stopping_.exchange(true)) return;
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  reap(true);
}

std::size_t Broker::connection_count() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(connections_.begin(), connections_.end(),
                                                [](const auto& c) { return !c->done.load(); }));
}

void Broker::accept_loop() {
  std::uint64_t next_id = 0;
  while (!stopping_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 50);
    reap(false);
    if (ready <= 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    auto conn = std::make_shared<Connection>(fd, next_id++);
    {
      std::lock_guard lock(mu_);
      connections_.push_back(conn);
    }
    conn->writer = std::thread([conn] { writer_loop(conn); });
    conn->reader = std::thread([this, conn] { reader_loop(conn); });
  }
}

void Broker::reap(bool all) {
  std::vector<std::shared_ptr<Connection>> finished;
  {
    std::lock_guard lock(mu_);
    auto split = std::stable_partition(connections_.begin(), connections_.end(), [all](const auto& c) {
      return !(all || c->done.load());
    });
    finished.assign(split, connections_.end());
    connections_.erase(split, connections_.end());
  }
  for (auto& conn : finished) {
    conn->shut();
    if (conn->reader.joinable()) conn->reader.join();
    if (conn->writer.joinable()) conn->writer.join();
  }
}

void Broker::writer_loop(const std::shared_ptr<Connection>& conn) {
  for (;;) {
    Outgoing item;
    {
      std::unique_lock lock(conn->queue_mu);
      conn->queue_cv.wait(lock, [&] { return conn->closing || !conn->queue.empty(); });
      if (conn->closing) return;
      item = std::move(conn->queue.front());
      conn->queue.pop_front();
      conn->sending = true;
    }
    const bool ok = detail::send_all(conn->fd, *item.frame);
    {
      std::lock_guard lock(conn->queue_mu);
      conn->sending = false;
    }
    conn->queue_cv.notify_all();
    if (!ok) {
      conn->shut();
      return;
    }
  }
}

void Broker::reader_loop(const std::shared_ptr<Connection>& conn) {
  FrameAssembler assembler;
  std::array<std::uint8_t, 64 * 1024> buffer{};
  try {
    for (;;) {
      const long n = detail::recv_some(conn->fd, buffer.data(), buffer.size());
      if (n <= 0) break;
      assembler.feed(std::span(buffer.data(), static_cast<std::size_t>(n)));
      while (auto frame = assembler.next_frame()) handle_frame(conn, std::move(*frame));
    }
  } catch (const std::exception& e) {
    spdlog::warn("broker: dropping connection {}: {}", conn->id, e.what());
    dropped_connections_.fetch_add(1);
  }
  {
    std::lock_guard lock(mu_);
    conn->subscriptions.clear();
  }
  // Let queued deliveries drain before closing our side, unless the peer is gone.
  {
    std::unique_lock lock(conn->queue_mu);
    conn->queue_cv.wait_for(lock, std::chrono::seconds(2),
                            [&] { return (conn->queue.empty() && !conn->sending) || conn->closing; });
  }
  conn->shut();
  conn->done.store(true);
}

void Broker::handle_frame(const std::shared_ptr<Connection>& conn, std::vector<std::uint8_t> bytes) {
  Envelope envelope = decode_envelope(bytes);
  if (envelope.topic == detail::kSubscribeTopic) {
    auto request = detail::decode_subscribe(envelope.payload);
    if (!request) throw DecodeError("payload", "malformed $subscribe");
    std::lock_guard lock(mu_);
    conn->subscriptions[request->id] = *request;
    const std::vector<std::uint8_t>* retained = nullptr;
    if (!request->qos.is_lossless()) {
      if (auto it = retained_.find(request->topic); it != retained_.end()) retained = it->second.get();
    }
    Envelope ack{detail::kSubackTopic, 0, 0, detail::encode_suback(request->id, retained)};
    conn->enqueue({std::make_shared<const std::vector<std::uint8_t>>(encode_envelope(ack)), ack.topic, 0});
    return;
  }
  if (envelope.topic == detail::kUnsubscribeTopic) {
    auto id = detail::decode_id(envelope.payload);
    if (!id) throw DecodeError("payload", "malformed $unsubscribe");
    std::lock_guard lock(mu_);
    conn->subscriptions.erase(*id);
    return;
  }
  if (envelope.topic.front() == '$') throw DecodeError("topic", "reserved topic from client");

  auto frame = std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes));
  std::lock_guard lock(mu_);
  retained_[envelope.topic] = frame;
  for (const auto& other : connections_) {
    bool any = false;
    std::size_t keep_last = 0;
    bool lossless = false;
    for (const auto& [id, sub] : other->subscriptions) {
      if (sub.topic != envelope.topic) continue;
      any = true;
      if (sub.qos.is_lossless()) lossless = true;
      keep_last = std::max(keep_last, sub.qos.depth);
    }
    if (any) other->enqueue({frame, envelope.topic, lossless ? 0 : keep_last});
  }
}

}  // namespace tma::bus
