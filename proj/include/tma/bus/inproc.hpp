#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "tma/bus/bus.hpp"

namespace tma::bus {

/// Shared routing table for InProcBus endpoints living in one process.
class InProcHub {
 public:
  void route(const Envelope& envelope);
  void add(const std::string& topic, const std::shared_ptr<Mailbox>& mailbox);
  void remove(const std::string& topic, const Mailbox* mailbox);
  std::size_t subscriber_count(const std::string& topic) const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<std::weak_ptr<Mailbox>>, std::less<>> routes_;
  std::map<std::string, Envelope, std::less<>> retained_;
};

/// One endpoint (publisher identity) on an in-process hub. Delivery happens
/// synchronously inside publish().
class InProcBus final : public Bus {
 public:
  explicit InProcBus(std::shared_ptr<InProcHub> hub = std::make_shared<InProcHub>());

  Envelope publish(std::string_view topic, std::span<const std::uint8_t> payload,
                   std::uint64_t timestamp_ns) override;
  using Bus::subscribe;
  Subscription subscribe(std::string_view topic, TopicQos qos) override;

  const std::shared_ptr<InProcHub>& hub() const { return hub_; }

 private:
  std::shared_ptr<InProcHub> hub_;
  std::mutex seq_mu_;
  std::map<std::string, std::uint64_t, std::less<>> next_seq_;
};

}  // namespace tma::bus
