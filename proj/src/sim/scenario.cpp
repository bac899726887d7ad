#include "tma/sim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "tma/io/pgm.hpp"
#include "tma/safety/ssd.hpp"

namespace tma::sim {

using geometry::LaneAssignment;
using nlohmann::json;

std::string_view to_string(Preset preset) { return preset == Preset::kLab ? "lab" : "field"; }

Preset parse_preset(std::string_view name) {
  if (name == "lab") return Preset::kLab;
  if (name == "field") return Preset::kField;
  throw ConfigError("preset", fmt::format("unknown preset '{}'", name));
}

std::array<double, 3> lane_offsets_for(double lane_width_m, double camera_offset_m) {
  return {-1.5 * lane_width_m - camera_offset_m, -0.5 * lane_width_m - camera_offset_m,
          0.5 * lane_width_m - camera_offset_m};
}

ScenarioConfig lab_preset() { return ScenarioConfig{}; }

ScenarioConfig field_preset() {
  ScenarioConfig c;
  c.preset = Preset::kField;
  c.camera = CameraModel{1280, 720, 1400.0, 640.0, 360.0, 1.2};
  c.lane_width_m = 3.6;
  c.lane_offsets_m = lane_offsets_for(3.6);
  c.initial_distance_m = 250.0;
  c.relative_speed_mps = -safety::mph_to_mps(60.0);
  c.duration_s = 10.0;
  c.noise = NoiseModel{0.02, 0.001};
  c.vehicle_width_m = 1.8;
  c.vehicle_height_m = 1.5;
  c.near_limit_m = 5.0;
  c.far_limit_m = 400.0;
  c.depth_unit_m = 0.005;
  return c;
}

ScenarioConfig preset_config(Preset preset) {
  return preset == Preset::kLab ? lab_preset() : field_preset();
}

ScenarioConfig with_scenario(ScenarioConfig config, int scenario) {
  if (scenario == 1) {
    config.target_lane = config.follower_lane;
  } else if (scenario == 2) {
    config.target_lane = config.follower_lane == LaneAssignment::kLeft ? LaneAssignment::kRight
                                                                        : LaneAssignment::kLeft;
  } else {
    throw ConfigError("scenario", fmt::format("must be 1 or 2 (got {})", scenario));
  }
  return config;
}

namespace {

void require(bool ok, const char* field, const char* message) {
  if (!ok) throw ConfigError(field, message);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }

bool is_lane(LaneAssignment lane) {
  return lane == LaneAssignment::kLeft || lane == LaneAssignment::kRight;
}

}  // namespace

void validate(const ScenarioConfig& c) {
  require(c.camera.width > 0, "camera.width", "must be positive");
  require(c.camera.height > 0, "camera.height", "must be positive");
  require(positive(c.camera.focal_px), "camera.focal_px", "must be positive");
  require(std::isfinite(c.camera.cx), "camera.cx", "must be finite");
  require(std::isfinite(c.camera.cy), "camera.cy", "must be finite");
  require(positive(c.camera.height_m), "camera.height_m", "must be positive");
  require(positive(c.lane_width_m), "lane_width_m", "must be positive");
  require(std::isfinite(c.lane_offsets_m[0]) && c.lane_offsets_m[0] < c.lane_offsets_m[1] &&
              c.lane_offsets_m[1] < c.lane_offsets_m[2] && std::isfinite(c.lane_offsets_m[2]),
          "lane_offsets_m", "must be three strictly increasing values");
  require(is_lane(c.follower_lane), "follower_lane", "must be left or right");
  require(is_lane(c.target_lane), "target_lane", "must be left or right");
  require(positive(c.initial_distance_m), "initial_distance_m", "must be positive");
  require(std::isfinite(c.relative_speed_mps), "relative_speed_mps", "must be finite");
  require(c.frame_rate_hz > 0, "frame_rate_hz", "must be positive");
  require(positive(c.duration_s), "duration_s", "must be positive");
  require(std::isfinite(c.noise.sigma0_m) && c.noise.sigma0_m >= 0.0, "noise.sigma0_m",
          "must be >= 0");
  require(std::isfinite(c.noise.k_per_m) && c.noise.k_per_m >= 0.0, "noise.k_per_m",
          "must be >= 0");
  require(positive(c.vehicle_width_m), "vehicle_width_m", "must be positive");
  require(positive(c.vehicle_height_m), "vehicle_height_m", "must be positive");
  require(positive(c.near_limit_m), "near_limit_m", "must be positive");
  require(positive(c.far_limit_m) && c.far_limit_m > c.near_limit_m, "far_limit_m",
          "must exceed near_limit_m");
  require(positive(c.stroke_px), "stroke_px", "must be positive");
  require(positive(c.depth_unit_m), "depth_unit_m", "must be positive");
}

json to_json(const ScenarioConfig& c) {
  return json{
      {"preset", std::string(to_string(c.preset))},
      {"camera",
       {{"width", c.camera.width},
        {"height", c.camera.height},
        {"focal_px", c.camera.focal_px},
        {"cx", c.camera.cx},
        {"cy", c.camera.cy},
        {"height_m", c.camera.height_m}}},
      {"lane_width_m", c.lane_width_m},
      {"lane_offsets_m", c.lane_offsets_m},
      {"follower_lane", std::string(geometry::to_string(c.follower_lane))},
      {"target_lane", std::string(geometry::to_string(c.target_lane))},
      {"initial_distance_m", c.initial_distance_m},
      {"relative_speed_mps", c.relative_speed_mps},
      {"frame_rate_hz", c.frame_rate_hz},
      {"duration_s", c.duration_s},
      {"noise", {{"sigma0_m", c.noise.sigma0_m}, {"k_per_m", c.noise.k_per_m}}},
      {"seed", c.seed},
      {"vehicle_width_m", c.vehicle_width_m},
      {"vehicle_height_m", c.vehicle_height_m},
      {"near_limit_m", c.near_limit_m},
      {"far_limit_m", c.far_limit_m},
      {"stroke_px", c.stroke_px},
      {"depth_unit_m", c.depth_unit_m},
  };
}

namespace {

template <class T>
void read_field(const json& j, const char* key, const std::string& path, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + key, "has the wrong type");
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) throw ConfigError(path + it.key(), "unknown field");
  }
}

LaneAssignment read_lane(const json& j, const char* key, LaneAssignment fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return geometry::parse_lane(j.at(key).get<std::string>());
  } catch (const std::exception&) {
    throw ConfigError(key, "must be \"left\" or \"right\"");
  }
}

}  // namespace

ScenarioConfig scenario_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario", "must be an object");
  reject_unknown(j,
                 {"preset", "camera", "lane_width_m", "lane_offsets_m", "follower_lane",
                  "target_lane", "initial_distance_m", "relative_speed_mps", "frame_rate_hz",
                  "duration_s", "noise", "seed", "vehicle_width_m", "vehicle_height_m",
                  "near_limit_m", "far_limit_m", "stroke_px", "depth_unit_m", "scenario",
                  "relative_speed_mph"},
                 "");
  Preset preset = Preset::kLab;
  if (j.contains("preset")) {
    if (!j.at("preset").is_string()) throw ConfigError("preset", "must be a string");
    preset = parse_preset(j.at("preset").get<std::string>());
  }
  ScenarioConfig c = preset_config(preset);

  if (j.contains("camera")) {
    const auto& cam = j.at("camera");
    if (!cam.is_object()) throw ConfigError("camera", "must be an object");
    reject_unknown(cam, {"width", "height", "focal_px", "cx", "cy", "height_m"}, "camera.");
    read_field(cam, "width", "camera.", c.camera.width);
    read_field(cam, "height", "camera.", c.camera.height);
    read_field(cam, "focal_px", "camera.", c.camera.focal_px);
    read_field(cam, "height_m", "camera.", c.camera.height_m);
    // The principal point follows the image centre unless given.
    c.camera.cx = 0.5 * c.camera.width;
    c.camera.cy = 0.5 * c.camera.height;
    read_field(cam, "cx", "camera.", c.camera.cx);
    read_field(cam, "cy", "camera.", c.camera.cy);
  }
  read_field(j, "lane_width_m", "", c.lane_width_m);
  if (j.contains("lane_offsets_m")) {
    read_field(j, "lane_offsets_m", "", c.lane_offsets_m);
  } else if (j.contains("lane_width_m")) {
    c.lane_offsets_m = lane_offsets_for(c.lane_width_m);
  }
  c.follower_lane = read_lane(j, "follower_lane", c.follower_lane);
  c.target_lane = read_lane(j, "target_lane", c.target_lane);
  read_field(j, "initial_distance_m", "", c.initial_distance_m);
  read_field(j, "relative_speed_mps", "", c.relative_speed_mps);
  if (j.contains("relative_speed_mph")) {
    if (j.contains("relative_speed_mps")) {
      throw ConfigError("relative_speed_mph", "give relative_speed_mps or relative_speed_mph, not both");
    }
    double mph = 0.0;
    read_field(j, "relative_speed_mph", "", mph);
    c.relative_speed_mps = safety::mph_to_mps(mph);
  }
  read_field(j, "frame_rate_hz", "", c.frame_rate_hz);
  read_field(j, "duration_s", "", c.duration_s);
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    if (!n.is_object()) throw ConfigError("noise", "must be an object");
    reject_unknown(n, {"sigma0_m", "k_per_m"}, "noise.");
    read_field(n, "sigma0_m", "noise.", c.noise.sigma0_m);
    read_field(n, "k_per_m", "noise.", c.noise.k_per_m);
  }
  read_field(j, "seed", "", c.seed);
  read_field(j, "vehicle_width_m", "", c.vehicle_width_m);
  read_field(j, "vehicle_height_m", "", c.vehicle_height_m);
  read_field(j, "near_limit_m", "", c.near_limit_m);
  read_field(j, "far_limit_m", "", c.far_limit_m);
  read_field(j, "stroke_px", "", c.stroke_px);
  read_field(j, "depth_unit_m", "", c.depth_unit_m);
  if (j.contains("scenario")) {
    int scenario = 0;
    read_field(j, "scenario", "", scenario);
    c = with_scenario(c, scenario);
  }
  validate(c);
  return c;
}

double lane_center_m(const ScenarioConfig& c, LaneAssignment lane) {
  if (lane == LaneAssignment::kLeft) return 0.5 * (c.lane_offsets_m[0] + c.lane_offsets_m[1]);
  if (lane == LaneAssignment::kRight) return 0.5 * (c.lane_offsets_m[1] + c.lane_offsets_m[2]);
  throw ConfigError("target_lane", "must be left or right");
}

std::size_t frame_count(const ScenarioConfig& c) {
  return static_cast<std::size_t>(std::floor(c.duration_s * c.frame_rate_hz + 1e-9));
}

std::uint64_t frame_timestamp_ns(std::uint64_t index, std::uint32_t frame_rate_hz) {
  return index * 1'000'000'000ULL / frame_rate_hz;
}

PixelPoint project(double x_m, double y_m, double z_m, const CameraModel& camera) {
  if (!(z_m > 0.0)) throw BehindCameraError(fmt::format("point at Z = {} m is behind the camera", z_m));
  return PixelPoint{camera.cx + camera.focal_px * x_m / z_m, camera.cy + camera.focal_px * y_m / z_m};
}

GrayImage rasterize_lane_mask(const ScenarioConfig& c) {
  const auto& cam = c.camera;
  GrayImage mask(cam.width, cam.height);
  // A ground line X = const projects to x = cx + (X / h) (y - cy) for y > cy.
  const double v_far = project(0.0, cam.height_m, c.far_limit_m, cam).v;
  const double v_near = project(0.0, cam.height_m, c.near_limit_m, cam).v;
  const int y_begin = std::max(0, static_cast<int>(std::ceil(v_far)));
  const int y_end = std::min(cam.height - 1, static_cast<int>(std::floor(v_near)));
  for (double offset : c.lane_offsets_m) {
    const double slope = offset / cam.height_m;
    const double intercept = cam.cx - slope * cam.cy;
    const double half_span = 0.5 * c.stroke_px * std::sqrt(1.0 + slope * slope);
    for (int y = y_begin; y <= y_end; ++y) {
      const double xc = slope * y + intercept;
      const int x0 = std::max(0, static_cast<int>(std::ceil(xc - half_span)));
      const int x1 = std::min(cam.width, static_cast<int>(std::ceil(xc + half_span)));
      for (int x = x0; x < x1; ++x) mask.at(x, y) = 255;
    }
  }
  return mask;
}

namespace {

int round_px(double v) { return static_cast<int>(std::floor(v + 0.5)); }

std::optional<SimFrame> generate_with_mask(std::uint64_t index, const ScenarioConfig& c,
                                           std::mt19937_64& rng, const GrayImage& mask) {
  const std::uint64_t t_ns = frame_timestamp_ns(index, c.frame_rate_hz);
  const double t_s = static_cast<double>(t_ns) * 1e-9;
  const double z = c.initial_distance_m + c.relative_speed_mps * t_s;
  if (z <= c.near_limit_m) return std::nullopt;

  const auto& cam = c.camera;
  SimFrame out;
  out.bundle.seq = index;
  out.bundle.timestamp_ns = t_ns;
  out.bundle.lane_mask = mask;
  out.bundle.depth = DepthImage(cam.width, cam.height, 0.0f);
  out.bundle.depth_unit_m = c.depth_unit_m;
  out.truth.distance_m = z;
  out.truth.speed_mps = c.relative_speed_mps;
  out.truth.lane = c.target_lane;

  const double x_center = lane_center_m(c, c.target_lane);
  const auto top_left =
      project(x_center - 0.5 * c.vehicle_width_m, cam.height_m - c.vehicle_height_m, z, cam);
  const auto bottom_right = project(x_center + 0.5 * c.vehicle_width_m, cam.height_m, z, cam);
  BoundingBox box{std::max(0, round_px(top_left.u)), std::max(0, round_px(top_left.v)),
                  std::min(cam.width, round_px(bottom_right.u)),
                  std::min(cam.height, round_px(bottom_right.v))};
  if (!box.non_empty()) {
    out.truth.occluded = true;  // out of the field of view
    return out;
  }
  out.truth.bbox = box;
  out.bundle.detections.push_back(Detection{box, "vehicle", 1.0});

  const double sigma = c.noise.sigma_at(z);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int y = box.y_min; y < box.y_max; ++y) {
    for (int x = box.x_min; x < box.x_max; ++x) {
      const double d = sigma > 0.0 ? z + sigma * gauss(rng) : z;
      out.bundle.depth.at(x, y) =
          io::dequantize_depth(io::quantize_depth(static_cast<float>(d), c.depth_unit_m),
                               c.depth_unit_m);
    }
  }
  return out;
}

}  // namespace

std::optional<SimFrame> generate_frame(std::uint64_t index, const ScenarioConfig& config,
                                       std::mt19937_64& rng) {
  return generate_with_mask(index, config, rng, rasterize_lane_mask(config));
}

ScenarioGenerator::ScenarioGenerator(ScenarioConfig config)
    : config_(std::move(config)), rng_(config_.seed), total_(0) {
  validate(config_);
  mask_ = rasterize_lane_mask(config_);
  total_ = frame_count(config_);
}

std::optional<SimFrame> ScenarioGenerator::next() {
  if (done_ || next_index_ >= total_) return std::nullopt;
  auto frame = generate_with_mask(next_index_, config_, rng_, mask_);
  if (!frame) {
    done_ = true;
    return std::nullopt;
  }
  ++next_index_;
  return frame;
}

}  // namespace tma::sim
