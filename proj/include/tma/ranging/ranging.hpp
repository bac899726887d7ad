#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>

#include "tma/geometry/lanes.hpp"
#include "tma/image.hpp"

namespace tma::ranging {

struct RangeSample {
  double distance_m = 0.0;
  std::uint64_t timestamp_ns = 0;
  std::size_t valid_pixel_count = 0;
};

/// Finite-difference closing speed; negative means the target is approaching.
struct SpeedEstimate {
  double speed_mps = 0.0;
  std::uint64_t baseline_ns = 0;
};

/// Which part of the box is averaged. kThirdBoth (default) takes the centred
/// box of one third width and one third height.
enum class RegionShape { kThirdBoth, kThirdWidth, kThirdHeight };

std::string_view to_string(RegionShape shape);
RegionShape parse_region_shape(std::string_view name);

class NoRangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ClockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
/// Raised when consecutive samples imply an implausible speed, which we read
/// as the nearest target having switched identity.
class OutlierError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultMaxPlausibleSpeedMps = 100.0;

BoundingBox central_region(const BoundingBox& box, RegionShape shape = RegionShape::kThirdBoth);

/// Mean of the valid depth pixels in central_region(box). The box is clipped
/// to the image first. Throws NoRangeError when no valid pixel remains.
RangeSample estimate_distance(const DepthImage& depth, const BoundingBox& box,
                              std::uint64_t timestamp_ns,
                              RegionShape shape = RegionShape::kThirdBoth);

SpeedEstimate estimate_speed(const RangeSample& previous, const RangeSample& current,
                             double max_plausible_mps = kDefaultMaxPlausibleSpeedMps);

/// A detection offered to the target selector, with its range when one was taken.
struct TrackCandidate {
  geometry::LaneAssignment lane = geometry::LaneAssignment::kUnknown;
  std::optional<RangeSample> range;
};

/// Detections that may threaten the follower: its own lane, plus anything
/// whose lane could not be determined.
bool is_monitored(geometry::LaneAssignment lane, geometry::LaneAssignment follower_lane);

/// Index of the nearest ranged candidate that is monitored; nullopt if none.
std::optional<std::size_t> track_target(std::span<const TrackCandidate> candidates,
                                        geometry::LaneAssignment follower_lane);

/// Speed over a baseline of `baseline_frames` accepted samples. A clock or
/// outlier error resets the chain to the offending sample.
class SpeedTracker {
 public:
  explicit SpeedTracker(int baseline_frames = 1,
                        double max_plausible_mps = kDefaultMaxPlausibleSpeedMps);

  std::optional<SpeedEstimate> update(const RangeSample& sample);
  void reset() { history_.clear(); }
  std::size_t history_size() const { return history_.size(); }
  int resets() const { return resets_; }

 private:
  int baseline_frames_;
  double max_plausible_mps_;
  std::deque<RangeSample> history_;
  int resets_ = 0;
};

}  // namespace tma::ranging
