#include "tma/pipeline/nodes.hpp"

#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tma/bus/inproc.hpp"

namespace tma::pipeline {

namespace {

constexpr std::chrono::milliseconds kRunPoll{100};

std::span<const std::uint8_t> bytes_of(std::string_view text) {
  return {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()};
}

void announce_ready(bus::Bus& bus, std::string_view role) {
  const std::uint8_t one = 1;
  bus.publish(ready_topic(role), std::span(&one, 1), 0);
}

}  // namespace

std::string ready_topic(std::string_view role) { return fmt::format("/graph/ready/{}", role); }

SimFrameSource::SimFrameSource(sim::ScenarioConfig config, std::optional<std::filesystem::path> record_dir)
    : generator_(config) {
  if (record_dir) recorder_.emplace(*record_dir, generator_.config());
}

std::optional<sim::SimFrame> SimFrameSource::next() {
  auto frame = generator_.next();
  if (recorder_) {
    if (frame) {
      recorder_->add(frame->bundle, frame->truth);
    } else {
      recorder_->finish();
      recorder_.reset();
    }
  }
  return frame;
}

std::optional<sim::SimFrame> ReplayFrameSource::next() {
  if (index_ >= reader_.size()) return std::nullopt;
  return reader_.load(index_++);
}

SensorNode::SensorNode(bus::Bus& bus, std::unique_ptr<FrameSource> source)
    : bus_(bus), source_(std::move(source)) {}

void SensorNode::await_ready(std::span<const std::string> roles, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (const auto& role : roles) {
    auto sub = bus_.subscribe(ready_topic(role), bus::TopicQos::keep_last(1));
    for (;;) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw bus::BusError(fmt::format("timed out waiting for role '{}'", role));
      if (sub.receive(std::min(left, kRunPoll))) break;
    }
    spdlog::info("sensor: {} is ready", role);
  }
}

PollResult SensorNode::step() {
  if (ended_) return PollResult::kEnd;
  auto frame = source_->next();
  if (!frame) {
    bus_.publish(kFrameTopic, {}, last_timestamp_ns_);
    ended_ = true;
    spdlog::info("sensor: end of stream after {} frames", published_);
    return PollResult::kEnd;
  }
  const auto payload = encode_frame(frame->bundle, frame->truth);
  last_timestamp_ns_ = frame->bundle.timestamp_ns;
  bus_.publish(kFrameTopic, payload, frame->bundle.timestamp_ns);
  ++published_;
  return PollResult::kProgress;
}

void SensorNode::run(const std::atomic<bool>& stop, std::chrono::nanoseconds period) {
  auto next_tick = std::chrono::steady_clock::now();
  while (!stop.load() && step() != PollResult::kEnd) {
    if (period.count() > 0) {
      next_tick += period;
      std::this_thread::sleep_until(next_tick);
    }
  }
}

PerceptionNode::PerceptionNode(bus::Bus& bus, PipelineConfig config, bus::TopicQos frame_qos)
    : bus_(bus), config_(std::move(config)), state_(config_), frames_(bus.subscribe(kFrameTopic, frame_qos)) {
  validate(config_);
  announce_ready(bus_, "perception");
}

PollResult PerceptionNode::poll(std::chrono::milliseconds timeout) {
  auto envelope = frames_.receive(timeout);
  if (!envelope) return PollResult::kIdle;
  if (envelope->payload.empty()) {
    bus_.publish(kShutdownTopic, {}, envelope->timestamp_ns);
    spdlog::info("perception: end of stream after {} frames", outcomes_.size());
    return PollResult::kEnd;
  }
  const auto started = std::chrono::steady_clock::now();
  DecodedFrame decoded;
  try {
    decoded = decode_frame(envelope->payload);
  } catch (const std::exception& e) {
    ++malformed_;
    spdlog::warn("perception: skipping malformed frame envelope seq {}: {}", envelope->seq, e.what());
    return PollResult::kProgress;
  }
  auto [report, next_state] = process_frame(decoded.bundle, std::move(state_), config_);
  state_ = std::move(next_state);
  bus_.publish(kLedTopic, encode_led_payload(report.warn), report.timestamp_ns);
  bus_.publish(kTelemetryTopic, bytes_of(encode_telemetry(report)), report.timestamp_ns);
  report.processing_latency_ns = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - started).count());
  outcomes_.push_back({std::move(report), std::move(decoded.truth)});
  return PollResult::kProgress;
}

PollResult PerceptionNode::run(const std::atomic<bool>& stop) {
  while (!stop.load()) {
    if (poll(kRunPoll) == PollResult::kEnd) return PollResult::kEnd;
  }
  return PollResult::kIdle;
}

std::optional<bool> decode_led_payload(std::span<const std::uint8_t> payload) {
  if (payload.size() != 1 || payload[0] > 1) return std::nullopt;
  return payload[0] == 1;
}

std::vector<std::uint8_t> encode_led_payload(bool on) { return {static_cast<std::uint8_t>(on ? 1 : 0)}; }

bool apply_led_status(LedState& state, std::uint64_t seq, bool on) {
  if (state.on == on) return false;
  state.on = on;
  state.since_seq = seq;
  return true;
}

LedNode::LedNode(bus::Bus& bus, bus::TopicQos qos)
    : bus_(bus),
      status_(bus.subscribe(kLedTopic, qos)),
      shutdown_(bus.subscribe(kShutdownTopic, bus::TopicQos::lossless())) {
  announce_ready(bus_, "led");
}

bool LedNode::consume(const bus::Envelope& envelope) {
  const auto on = decode_led_payload(envelope.payload);
  if (!on) {
    ++malformed_;
    spdlog::warn("led: ignoring malformed status seq {} ({} bytes)", envelope.seq, envelope.payload.size());
    return false;
  }
  history_.push_back({envelope.seq, envelope.timestamp_ns, *on});
  if (apply_led_status(state_, envelope.seq, *on)) {
    ++transitions_;
    spdlog::info("led: {} at seq {} t={} ns", *on ? "ON" : "off", envelope.seq, envelope.timestamp_ns);
  }
  return true;
}

PollResult LedNode::poll(std::chrono::milliseconds timeout) {
  bool progressed = false;
  if (auto e = status_.receive(timeout)) {
    consume(*e);
    progressed = true;
  }
  if (shutdown_.try_receive()) {
    // Statuses published before the shutdown notice are already queued.
    while (auto e = status_.try_receive()) consume(*e);
    return PollResult::kEnd;
  }
  return progressed ? PollResult::kProgress : PollResult::kIdle;
}

PollResult LedNode::run(const std::atomic<bool>& stop) {
  while (!stop.load()) {
    if (poll(kRunPoll) == PollResult::kEnd) return PollResult::kEnd;
  }
  return PollResult::kIdle;
}

GraphResult run_in_process(std::unique_ptr<FrameSource> source, const PipelineConfig& config) {
  bus::InProcBus bus;
  PerceptionNode perception(bus, config, bus::TopicQos::lossless());
  LedNode led(bus);
  SensorNode sensor(bus, std::move(source));

  bool perception_done = false;
  bool led_done = false;
  while (!led_done) {
    const bool sensor_done = sensor.step() == PollResult::kEnd;
    while (!perception_done) {
      const auto r = perception.poll(std::chrono::milliseconds(0));
      if (r == PollResult::kEnd) perception_done = true;
      if (r != PollResult::kProgress) break;
    }
    while (!led_done) {
      const auto r = led.poll(std::chrono::milliseconds(0));
      if (r == PollResult::kEnd) led_done = true;
      if (r != PollResult::kProgress) break;
    }
    if (sensor_done && !perception_done) {
      throw std::logic_error("perception did not reach the end of the stream");
    }
  }
  return GraphResult{perception.outcomes(), led.history(), led.state(), sensor.frames_published()};
}

}  // namespace tma::pipeline
