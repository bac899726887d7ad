#include "tma/bus/inproc.hpp"

#include <algorithm>

namespace tma::bus {

void InProcHub::route(const Envelope& envelope) {
  std::lock_guard lock(mu_);
  retained_[envelope.topic] = envelope;
  auto it = routes_.find(envelope.topic);
  if (it == routes_.end()) return;
  auto& boxes = it->second;
  std::erase_if(boxes, [](const std::weak_ptr<Mailbox>& w) { return w.expired(); });
  for (const auto& weak : boxes) {
    if (auto box = weak.lock()) box->push(envelope);
  }
}

void InProcHub::add(const std::string& topic, const std::shared_ptr<Mailbox>& mailbox) {
  std::lock_guard lock(mu_);
  if (!mailbox->qos().is_lossless()) {
    if (auto it = retained_.find(topic); it != retained_.end()) mailbox->push(it->second);
  }
  routes_[topic].push_back(mailbox);
}

void InProcHub::remove(const std::string& topic, const Mailbox* mailbox) {
  std::lock_guard lock(mu_);
  auto it = routes_.find(topic);
  if (it == routes_.end()) return;
  std::erase_if(it->second, [&](const std::weak_ptr<Mailbox>& w) {
    auto box = w.lock();
    return !box || box.get() == mailbox;
  });
}

std::size_t InProcHub::subscriber_count(const std::string& topic) const {
  std::lock_guard lock(mu_);
  auto it = routes_.find(topic);
  if (it == routes_.end()) return 0;
  return static_cast<std::size_t>(std::count_if(it->second.begin(), it->second.end(),
                                                [](const auto& w) { return !w.expired(); }));
}

InProcBus::InProcBus(std::shared_ptr<InProcHub> hub) : hub_(std::move(hub)) {}

Envelope InProcBus::publish(std::string_view topic, std::span<const std::uint8_t> payload,
                            std::uint64_t timestamp_ns) {
  check_user_topic(topic);
  std::lock_guard lock(seq_mu_);
  auto it = next_seq_.find(topic);
  if (it == next_seq_.end()) it = next_seq_.emplace(std::string(topic), 0).first;
  Envelope e{std::string(topic), it->second, timestamp_ns, {payload.begin(), payload.end()}};
  hub_->route(e);
  ++it->second;
  return e;
}

Subscription InProcBus::subscribe(std::string_view topic, TopicQos qos) {
  check_user_topic(topic);
  auto mailbox = std::make_shared<Mailbox>(qos);
  std::string name(topic);
  hub_->add(name, mailbox);
  std::weak_ptr<InProcHub> weak_hub = hub_;
  const Mailbox* raw = mailbox.get();
  return Subscription(name, mailbox, [weak_hub, name, raw] {
    if (auto hub = weak_hub.lock()) hub->remove(name, raw);
  });
}

}  // namespace tma::bus
