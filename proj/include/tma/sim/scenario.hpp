#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tma/geometry/lanes.hpp"
#include "tma/pipeline/frame.hpp"

namespace tma::sim {

/// Invalid scenario/config field; field() names it (e.g. "camera.focal_px").
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class BehindCameraError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class Preset { kLab, kField };

std::string_view to_string(Preset preset);
Preset parse_preset(std::string_view name);

/// Pinhole camera looking back along the road; +X right, +Y down, +Z away.
struct CameraModel {
  int width = 640;
  int height = 480;
  double focal_px = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  double height_m = 0.15;
};

/// Per-pixel depth noise standard deviation sigma(Z) = sigma0 + k * Z.
struct NoiseModel {
  double sigma0_m = 0.005;
  double k_per_m = 0.005;
  double sigma_at(double z) const { return sigma0_m + k_per_m * z; }
};

struct ScenarioConfig {
  Preset preset = Preset::kLab;
  CameraModel camera;
  double lane_width_m = 0.35;
  /// Lateral positions of the left, medium and right lane lines.
  std::array<double, 3> lane_offsets_m{-0.525, -0.175, 0.175};
  geometry::LaneAssignment follower_lane = geometry::LaneAssignment::kRight;
  geometry::LaneAssignment target_lane = geometry::LaneAssignment::kRight;
  double initial_distance_m = 3.0;
  /// Rate of change of the gap; negative means approaching.
  double relative_speed_mps = -0.2;
  std::uint32_t frame_rate_hz = 10;
  double duration_s = 20.0;
  NoiseModel noise;
  std::uint64_t seed = 1;
  double vehicle_width_m = 0.20;
  double vehicle_height_m = 0.06;
  /// Lane lines are drawn over [near_limit_m, far_limit_m]; the run ends once
  /// the target is at or inside near_limit_m.
  double near_limit_m = 0.2;
  double far_limit_m = 20.0;
  double stroke_px = 2.0;
  double depth_unit_m = 0.001;
};

ScenarioConfig lab_preset();
ScenarioConfig field_preset();
ScenarioConfig preset_config(Preset preset);

/// Lane-line offsets for a camera sitting `camera_offset_m` right of the
/// centre of the right lane of a two-lane road.
std::array<double, 3> lane_offsets_for(double lane_width_m, double camera_offset_m = 0.0);

/// Scenario 1: target in the follower's lane. Scenario 2: the other lane.
ScenarioConfig with_scenario(ScenarioConfig config, int scenario);

/// Throws ConfigError naming the first invalid field.
void validate(const ScenarioConfig& config);

nlohmann::json to_json(const ScenarioConfig& config);
/// Starts from the preset named in j (default lab) and applies the fields
/// present. Unknown keys are rejected. The result is validated.
ScenarioConfig scenario_from_json(const nlohmann::json& j);

/// Lateral centre of a lane (left or right) in world meters.
double lane_center_m(const ScenarioConfig& config, geometry::LaneAssignment lane);

std::size_t frame_count(const ScenarioConfig& config);
/// k * 1e9 / frame_rate, in integer nanoseconds.
std::uint64_t frame_timestamp_ns(std::uint64_t index, std::uint32_t frame_rate_hz);

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

/// u = cx + f X / Z, v = cy + f Y / Z. Throws BehindCameraError for Z <= 0.
PixelPoint project(double x_m, double y_m, double z_m, const CameraModel& camera);

struct SimFrame {
  FrameBundle bundle;
  GroundTruth truth;
};

/// The static lane-line mask for a scenario.
GrayImage rasterize_lane_mask(const ScenarioConfig& config);

/// Frame `index` of the scenario, drawing depth noise from `rng`. Returns
/// std::nullopt once the target has reached the near limit (scenario over).
std::optional<SimFrame> generate_frame(std::uint64_t index, const ScenarioConfig& config,
                                       std::mt19937_64& rng);

/// Sequential generator owning the RNG and the cached lane mask.
class ScenarioGenerator {
 public:
  explicit ScenarioGenerator(ScenarioConfig config);

  std::optional<SimFrame> next();
  const ScenarioConfig& config() const { return config_; }
  std::uint64_t frames_emitted() const { return next_index_; }

 private:
  ScenarioConfig config_;
  std::mt19937_64 rng_;
  GrayImage mask_;
  std::size_t total_;
  std::uint64_t next_index_ = 0;
  bool done_ = false;
};

}  // namespace tma::sim
