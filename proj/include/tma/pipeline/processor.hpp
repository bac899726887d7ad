#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tma/geometry/lanes.hpp"
#include "tma/pipeline/frame.hpp"
#include "tma/ranging/ranging.hpp"
#include "tma/safety/ssd.hpp"
#include "tma/sim/scenario.hpp"

namespace tma::pipeline {

struct PipelineConfig {
  safety::WarningMode mode = safety::WarningMode::kSimProximity;
  safety::WarningConfig warning;
  geometry::LaneDetectorParams lanes;
  ranging::RegionShape region = ranging::RegionShape::kThirdBoth;
  /// Lane the follower drives in; detections there (or of unknown lane) are monitored.
  geometry::LaneAssignment follower_lane = geometry::LaneAssignment::kRight;
  int speed_baseline_frames = 1;
  double max_plausible_speed_mps = ranging::kDefaultMaxPlausibleSpeedMps;
  /// Consecutive raw warnings needed before the output warns.
  int debounce_frames = 1;
};

/// Defaults for a scenario preset: sim proximity for lab, continuous SSD with
/// a 5-frame speed baseline for field. follower_lane comes from the scenario.
PipelineConfig default_pipeline_config(const sim::ScenarioConfig& scenario);

/// Throws sim::ConfigError naming the offending field ("pipeline.<name>").
void validate(const PipelineConfig& config);
nlohmann::json to_json(const PipelineConfig& config);
/// Applies the fields present in `j` on top of `base`; unknown keys are rejected.
PipelineConfig pipeline_from_json(const nlohmann::json& j, PipelineConfig base);

/// State carried by the perception loop from one frame to the next.
struct TrackerState {
  ranging::SpeedTracker speed;
  int consecutive_warnings = 0;

  explicit TrackerState(const PipelineConfig& config)
      : speed(config.speed_baseline_frames, config.max_plausible_speed_mps) {}
};

struct DetectionReport {
  BoundingBox box;
  geometry::LaneAssignment lane = geometry::LaneAssignment::kUnknown;
  bool monitored = false;
  /// Present when the detection was monitored and had valid depth.
  std::optional<double> distance_m;
};

struct ProcessReport {
  std::uint64_t seq = 0;
  std::uint64_t timestamp_ns = 0;
  bool lanes_found = false;
  std::vector<DetectionReport> detections;
  /// Index into detections of the tracked target.
  std::optional<std::size_t> target;
  std::optional<double> distance_m;
  std::optional<double> speed_mps;
  /// Present iff a warning evaluation ran this frame.
  std::optional<safety::WarningDecision> decision;
  /// Debounced output; this is what goes to the LED.
  bool warn = false;
  /// Filled by the node; not part of the deterministic encodings.
  std::uint64_t processing_latency_ns = 0;

  /// Lane of the target, else of the first detection, else Unknown.
  geometry::LaneAssignment primary_lane() const;
};

/// One perception step. Pure: the result depends only on the arguments.
std::pair<ProcessReport, TrackerState> process_frame(const FrameBundle& frame, TrackerState state,
                                                     const PipelineConfig& config);

/// Telemetry record (latency excluded so streams are reproducible).
nlohmann::json to_json(const ProcessReport& report);
std::string encode_telemetry(const ProcessReport& report);

}  // namespace tma::pipeline
