#include "tma/pipeline/processor.hpp"

#include <fmt/format.h>

namespace tma::pipeline {

using geometry::LaneAssignment;
using sim::ConfigError;

PipelineConfig default_pipeline_config(const sim::ScenarioConfig& scenario) {
  PipelineConfig c;
  c.follower_lane = scenario.follower_lane;
  if (scenario.preset == sim::Preset::kField) {
    c.mode = safety::WarningMode::kFieldContinuous;
    c.speed_baseline_frames = 5;
  }
  return c;
}

void validate(const PipelineConfig& c) {
  if (!(c.warning.sim_threshold_m > 0.0)) throw ConfigError("pipeline.sim_threshold_m", "must be > 0");
  if (!(c.warning.ssd.reaction_time_s >= 0.0)) {
    throw ConfigError("pipeline.reaction_time_s", "must be >= 0");
  }
  if (!(c.warning.ssd.decel_ftps2 > 0.0)) throw ConfigError("pipeline.decel_ftps2", "must be > 0");
  if (!(c.warning.table_tolerance_mph >= 0.0 && c.warning.table_tolerance_mph < 5.0)) {
    throw ConfigError("pipeline.table_tolerance_mph", "must be in [0, 5)");
  }
  if (c.lanes.median_kernel < 3 || c.lanes.median_kernel % 2 == 0) {
    throw ConfigError("pipeline.median_kernel", "must be odd and >= 3");
  }
  if (c.lanes.min_area == 0) throw ConfigError("pipeline.min_area", "must be >= 1");
  if (c.follower_lane != LaneAssignment::kLeft && c.follower_lane != LaneAssignment::kRight) {
    throw ConfigError("pipeline.follower_lane", "must be left or right");
  }
  if (c.speed_baseline_frames < 1) throw ConfigError("pipeline.speed_baseline_frames", "must be >= 1");
  if (!(c.max_plausible_speed_mps > 0.0)) {
    throw ConfigError("pipeline.max_plausible_speed_mps", "must be > 0");
  }
  if (c.debounce_frames < 1) throw ConfigError("pipeline.debounce_frames", "must be >= 1");
}

nlohmann::json to_json(const PipelineConfig& c) {
  return {
      {"mode", safety::to_string(c.mode)},
      {"sim_threshold_m", c.warning.sim_threshold_m},
      {"reaction_time_s", c.warning.ssd.reaction_time_s},
      {"decel_ftps2", c.warning.ssd.decel_ftps2},
      {"table_tolerance_mph", c.warning.table_tolerance_mph},
      {"median_kernel", c.lanes.median_kernel},
      {"min_area", c.lanes.min_area},
      {"region", ranging::to_string(c.region)},
      {"follower_lane", geometry::to_string(c.follower_lane)},
      {"speed_baseline_frames", c.speed_baseline_frames},
      {"max_plausible_speed_mps", c.max_plausible_speed_mps},
      {"debounce_frames", c.debounce_frames},
  };
}

namespace {

template <class T>
T field(const nlohmann::json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("pipeline.{}", name), e.what());
  }
}

template <class Parse>
auto parsed(const nlohmann::json& j, const char* name, Parse parse) {
  const auto text = field<std::string>(j, name);
  try {
    return parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("pipeline.{}", name), e.what());
  }
}

}  // namespace

PipelineConfig pipeline_from_json(const nlohmann::json& j, PipelineConfig c) {
  if (!j.is_object()) throw ConfigError("pipeline", "must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "mode") {
      c.mode = parsed(j, "mode", [](const std::string& s) { return safety::parse_mode(s); });
    } else if (key == "sim_threshold_m") {
      c.warning.sim_threshold_m = field<double>(j, "sim_threshold_m");
    } else if (key == "reaction_time_s") {
      c.warning.ssd.reaction_time_s = field<double>(j, "reaction_time_s");
    } else if (key == "decel_ftps2") {
      c.warning.ssd.decel_ftps2 = field<double>(j, "decel_ftps2");
    } else if (key == "table_tolerance_mph") {
      c.warning.table_tolerance_mph = field<double>(j, "table_tolerance_mph");
    } else if (key == "median_kernel") {
      c.lanes.median_kernel = field<int>(j, "median_kernel");
    } else if (key == "min_area") {
      c.lanes.min_area = field<std::size_t>(j, "min_area");
    } else if (key == "region") {
      c.region = parsed(j, "region", [](const std::string& s) { return ranging::parse_region_shape(s); });
    } else if (key == "follower_lane") {
      c.follower_lane = parsed(j, "follower_lane", [](const std::string& s) { return geometry::parse_lane(s); });
    } else if (key == "speed_baseline_frames") {
      c.speed_baseline_frames = field<int>(j, "speed_baseline_frames");
    } else if (key == "max_plausible_speed_mps") {
      c.max_plausible_speed_mps = field<double>(j, "max_plausible_speed_mps");
    } else if (key == "debounce_frames") {
      c.debounce_frames = field<int>(j, "debounce_frames");
    } else {
      throw ConfigError(fmt::format("pipeline.{}", key), "unknown field");
    }
  }
  validate(c);
  return c;
}

LaneAssignment ProcessReport::primary_lane() const {
  if (target) return detections[*target].lane;
  if (!detections.empty()) return detections.front().lane;
  return LaneAssignment::kUnknown;
}

std::pair<ProcessReport, TrackerState> process_frame(const FrameBundle& frame, TrackerState state,
                                                     const PipelineConfig& config) {
  ProcessReport report;
  report.seq = frame.seq;
  report.timestamp_ns = frame.timestamp_ns;

  const auto lanes = geometry::detect_lanes(frame.lane_mask, config.lanes);
  report.lanes_found = lanes.has_value();

  std::vector<ranging::TrackCandidate> candidates;
  candidates.reserve(frame.detections.size());
  for (const auto& detection : frame.detections) {
    DetectionReport d;
    d.box = detection.box;
    d.lane = lanes ? geometry::assign_lane(detection.box, *lanes) : LaneAssignment::kUnknown;
    d.monitored = ranging::is_monitored(d.lane, config.follower_lane);
    ranging::TrackCandidate candidate{d.lane, std::nullopt};
    if (d.monitored) {
      try {
        candidate.range = ranging::estimate_distance(frame.depth, detection.box, frame.timestamp_ns,
                                                     config.region);
        d.distance_m = candidate.range->distance_m;
      } catch (const ranging::NoRangeError&) {
        // No valid depth under the box this frame.
      }
    }
    report.detections.push_back(d);
    candidates.push_back(candidate);
  }

  report.target = ranging::track_target(candidates, config.follower_lane);
  if (report.target) {
    const auto& sample = *candidates[*report.target].range;
    report.distance_m = sample.distance_m;
    if (auto speed = state.speed.update(sample)) report.speed_mps = speed->speed_mps;

    const bool needs_speed = config.mode != safety::WarningMode::kSimProximity;
    if (!needs_speed || report.speed_mps) {
      report.decision = safety::should_warn(sample.distance_m, report.speed_mps.value_or(0.0),
                                            config.mode, config.warning);
    }
  }

  const bool raw = report.decision && report.decision->warn;
  state.consecutive_warnings = raw ? state.consecutive_warnings + 1 : 0;
  report.warn = state.consecutive_warnings >= config.debounce_frames;
  return {std::move(report), std::move(state)};
}

nlohmann::json to_json(const ProcessReport& r) {
  nlohmann::json detections = nlohmann::json::array();
  for (const auto& d : r.detections) {
    nlohmann::json jd{{"box", to_json(d.box)}, {"lane", geometry::to_string(d.lane)}, {"monitored", d.monitored}};
    jd["distance_m"] = d.distance_m ? nlohmann::json(*d.distance_m) : nlohmann::json(nullptr);
    detections.push_back(std::move(jd));
  }
  nlohmann::json j{
      {"seq", r.seq},
      {"timestamp_ns", r.timestamp_ns},
      {"lanes_found", r.lanes_found},
      {"detections", std::move(detections)},
      {"target", r.target ? nlohmann::json(*r.target) : nlohmann::json(nullptr)},
      {"distance_m", r.distance_m ? nlohmann::json(*r.distance_m) : nlohmann::json(nullptr)},
      {"speed_mps", r.speed_mps ? nlohmann::json(*r.speed_mps) : nlohmann::json(nullptr)},
      {"warn", r.warn},
  };
  if (r.decision) {
    j["decision"] = {{"warn", r.decision->warn},
                     {"mode", safety::to_string(r.decision->mode)},
                     {"threshold_m", r.decision->threshold_m},
                     {"distance_m", r.decision->distance_m},
                     {"closing_speed_mps", r.decision->closing_speed_mps},
                     {"reason", r.decision->reason}};
  } else {
    j["decision"] = nullptr;
  }
  return j;
}

std::string encode_telemetry(const ProcessReport& report) { return to_json(report).dump(); }

}  // namespace tma::pipeline
