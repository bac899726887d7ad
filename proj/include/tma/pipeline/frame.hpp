#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tma/geometry/lanes.hpp"
#include "tma/image.hpp"

namespace tma {

struct Detection {
  BoundingBox box;
  std::string label = "vehicle";
  double confidence = 1.0;

  bool operator==(const Detection&) const = default;
};

/// One synchronized sensor tick as produced by the perceptor.
struct FrameBundle {
  std::uint64_t seq = 0;
  std::uint64_t timestamp_ns = 0;
  GrayImage lane_mask;
  DepthImage depth;
  std::vector<Detection> detections;
  /// Quantum of the 16-bit depth encoding (meters per count).
  double depth_unit_m = 0.001;

  bool operator==(const FrameBundle&) const = default;
};

/// Simulator truth for scoring; never consulted by the processing chain.
struct GroundTruth {
  double distance_m = 0.0;
  double speed_mps = 0.0;
  geometry::LaneAssignment lane = geometry::LaneAssignment::kUnknown;
  std::optional<BoundingBox> bbox;
  bool occluded = false;

  bool operator==(const GroundTruth&) const = default;
};

struct DecodedFrame {
  FrameBundle bundle;
  std::optional<GroundTruth> truth;
};

nlohmann::json to_json(const BoundingBox& box);
BoundingBox bbox_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Detection& detection);
Detection detection_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroundTruth& truth);
GroundTruth truth_from_json(const nlohmann::json& j);

/// Bus payload for "/camera/frame": 4-byte big-endian header length, JSON
/// header (seq, timestamp_ns, width, height, depth_unit_m, detections,
/// optional truth), 8-bit mask PGM, 16-bit depth PGM. The images use the
/// same encodings as recording files.
std::vector<std::uint8_t> encode_frame(const FrameBundle& frame,
                                       const std::optional<GroundTruth>& truth = std::nullopt);
/// Throws io::FormatError on malformed input.
DecodedFrame decode_frame(std::span<const std::uint8_t> bytes);

/// Checks mask/depth dimensions agree and detections lie inside the image.
/// Throws io::FormatError naming the problem.
void validate_frame(const FrameBundle& frame);

}  // namespace tma
