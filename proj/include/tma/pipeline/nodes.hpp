#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tma/bus/bus.hpp"
#include "tma/pipeline/processor.hpp"
#include "tma/sim/recording.hpp"
#include "tma/sim/scenario.hpp"

namespace tma::pipeline {

inline constexpr std::string_view kFrameTopic = "/camera/frame";
inline constexpr std::string_view kLedTopic = "/led/status";
inline constexpr std::string_view kTelemetryTopic = "/telemetry";
inline constexpr std::string_view kShutdownTopic = "/graph/shutdown";

/// Topic on which a role announces it is subscribed and ready.
std::string ready_topic(std::string_view role);

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<sim::SimFrame> next() = 0;
};

/// Frames from the simulator, optionally recorded as they are produced.
class SimFrameSource final : public FrameSource {
 public:
  explicit SimFrameSource(sim::ScenarioConfig config,
                          std::optional<std::filesystem::path> record_dir = std::nullopt);
  std::optional<sim::SimFrame> next() override;

 private:
  sim::ScenarioGenerator generator_;
  std::optional<sim::RecordingWriter> recorder_;
};

class ReplayFrameSource final : public FrameSource {
 public:
  explicit ReplayFrameSource(const std::filesystem::path& dir) : reader_(dir) {}
  std::optional<sim::SimFrame> next() override;
  const sim::RecordingReader& reader() const { return reader_; }

 private:
  sim::RecordingReader reader_;
  std::size_t index_ = 0;
};

enum class PollResult { kIdle, kProgress, kEnd };

/// Publishes one encoded frame per step on kFrameTopic; an empty payload
/// marks the end of the stream.
class SensorNode {
 public:
  SensorNode(bus::Bus& bus, std::unique_ptr<FrameSource> source);

  /// Blocks until every role has announced readiness. Throws bus::BusError on timeout.
  void await_ready(std::span<const std::string> roles, std::chrono::milliseconds timeout);
  /// Publishes the next frame, or the end marker. kEnd after the end marker.
  PollResult step();
  /// Steps until the stream ends or `stop` is set, sleeping `period` between frames.
  void run(const std::atomic<bool>& stop, std::chrono::nanoseconds period = {});
  std::size_t frames_published() const { return published_; }

 private:
  bus::Bus& bus_;
  std::unique_ptr<FrameSource> source_;
  std::size_t published_ = 0;
  std::uint64_t last_timestamp_ns_ = 0;
  bool ended_ = false;
};

struct FrameOutcome {
  ProcessReport report;
  std::optional<GroundTruth> truth;
};

/// Consumes frames, runs process_frame, and publishes the LED decision and
/// telemetry for each frame before taking the next one.
class PerceptionNode {
 public:
  PerceptionNode(bus::Bus& bus, PipelineConfig config,
                 bus::TopicQos frame_qos = bus::TopicQos::keep_last(1));

  PollResult poll(std::chrono::milliseconds timeout);
  PollResult run(const std::atomic<bool>& stop);

  const std::vector<FrameOutcome>& outcomes() const { return outcomes_; }
  std::size_t malformed_frames() const { return malformed_; }

 private:
  bus::Bus& bus_;
  PipelineConfig config_;
  TrackerState state_;
  bus::Subscription frames_;
  std::vector<FrameOutcome> outcomes_;
  std::size_t malformed_ = 0;
};

struct LedState {
  bool on = false;
  std::uint64_t since_seq = 0;
};

struct LedEvent {
  std::uint64_t seq = 0;
  std::uint64_t timestamp_ns = 0;
  bool on = false;
  bool operator==(const LedEvent&) const = default;
};

/// 0x00 / 0x01 -> false / true; anything else is malformed (nullopt).
std::optional<bool> decode_led_payload(std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> encode_led_payload(bool on);

/// Folds one status into the state. Returns true on a transition.
bool apply_led_status(LedState& state, std::uint64_t seq, bool on);

class LedNode {
 public:
  explicit LedNode(bus::Bus& bus, bus::TopicQos qos = bus::TopicQos::lossless());

  /// kEnd once a shutdown notice arrives and all earlier statuses are consumed.
  PollResult poll(std::chrono::milliseconds timeout);
  PollResult run(const std::atomic<bool>& stop);

  const LedState& state() const { return state_; }
  const std::vector<LedEvent>& history() const { return history_; }
  std::size_t transitions() const { return transitions_; }
  std::size_t malformed() const { return malformed_; }

 private:
  bool consume(const bus::Envelope& envelope);

  bus::Bus& bus_;
  bus::Subscription status_;
  bus::Subscription shutdown_;
  LedState state_;
  std::vector<LedEvent> history_;
  std::size_t transitions_ = 0;
  std::size_t malformed_ = 0;
};

struct GraphResult {
  std::vector<FrameOutcome> outcomes;
  std::vector<LedEvent> led_history;
  LedState led;
  std::size_t frames_published = 0;
};

/// Runs sensor, perception and LED on one in-process bus, single-threaded,
/// with lossless frame delivery.
GraphResult run_in_process(std::unique_ptr<FrameSource> source, const PipelineConfig& config);

}  // namespace tma::pipeline
