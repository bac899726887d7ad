#include "tma/ranging/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "tma/kernels/depth_sum.hpp"

namespace tma::ranging {

std::string_view to_string(RegionShape shape) {
  switch (shape) {
    case RegionShape::kThirdBoth:
      return "third_both";
    case RegionShape::kThirdWidth:
      return "third_width";
    case RegionShape::kThirdHeight:
      return "third_height";
  }
  return "third_both";
}

RegionShape parse_region_shape(std::string_view name) {
  if (name == "third_both") return RegionShape::kThirdBoth;
  if (name == "third_width") return RegionShape::kThirdWidth;
  if (name == "third_height") return RegionShape::kThirdHeight;
  throw std::invalid_argument("unknown region shape '" + std::string(name) + "'");
}

namespace {

// Centred sub-interval of one third the length, at least one pixel.
void third_of(int lo, int hi, int& out_lo, int& out_hi) {
  const int len = hi - lo;
  const int third = std::max(1, len / 3);
  out_lo = lo + (len - third) / 2;
  out_hi = out_lo + third;
}

}  // namespace

BoundingBox central_region(const BoundingBox& box, RegionShape shape) {
  BoundingBox out = box;
  if (shape != RegionShape::kThirdHeight) third_of(box.x_min, box.x_max, out.x_min, out.x_max);
  if (shape != RegionShape::kThirdWidth) third_of(box.y_min, box.y_max, out.y_min, out.y_max);
  return out;
}

RangeSample estimate_distance(const DepthImage& depth, const BoundingBox& box,
                              std::uint64_t timestamp_ns, RegionShape shape) {
  BoundingBox region = central_region(box, shape);
  region.x_min = std::max(region.x_min, 0);
  region.y_min = std::max(region.y_min, 0);
  region.x_max = std::min(region.x_max, depth.width());
  region.y_max = std::min(region.y_max, depth.height());
  kernels::DepthSum total;
  if (region.non_empty()) {
    for (int y = region.y_min; y < region.y_max; ++y) {
      total += kernels::sum_valid_depth(
          depth.row(y).subspan(static_cast<std::size_t>(region.x_min),
                               static_cast<std::size_t>(region.width())));
    }
  }
  if (total.count == 0) {
    throw NoRangeError(fmt::format("no valid depth in region [{},{})x[{},{})", region.x_min,
                                   region.x_max, region.y_min, region.y_max));
  }
  return RangeSample{total.sum / static_cast<double>(total.count), timestamp_ns, total.count};
}

SpeedEstimate estimate_speed(const RangeSample& previous, const RangeSample& current,
                             double max_plausible_mps) {
  if (current.timestamp_ns <= previous.timestamp_ns) {
    throw ClockError(fmt::format("timestamps not increasing ({} -> {})", previous.timestamp_ns,
                                 current.timestamp_ns));
  }
  const std::uint64_t elapsed = current.timestamp_ns - previous.timestamp_ns;
  const double speed =
      (current.distance_m - previous.distance_m) / (static_cast<double>(elapsed) * 1e-9);
  if (!std::isfinite(speed) || std::abs(speed) > max_plausible_mps) {
    throw OutlierError(fmt::format("implausible speed {:.3f} m/s", speed));
  }
  return SpeedEstimate{speed, elapsed};
}

bool is_monitored(geometry::LaneAssignment lane, geometry::LaneAssignment follower_lane) {
  return lane == follower_lane || lane == geometry::LaneAssignment::kUnknown;
}

std::optional<std::size_t> track_target(std::span<const TrackCandidate> candidates,
                                        geometry::LaneAssignment follower_lane) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (!c.range || !is_monitored(c.lane, follower_lane)) continue;
    if (!best || c.range->distance_m < candidates[*best].range->distance_m) best = i;
  }
  return best;
}

SpeedTracker::SpeedTracker(int baseline_frames, double max_plausible_mps)
    : baseline_frames_(baseline_frames), max_plausible_mps_(max_plausible_mps) {
  if (baseline_frames < 1) throw std::invalid_argument("speed baseline must be >= 1 frame");
  if (!(max_plausible_mps > 0.0)) throw std::invalid_argument("max plausible speed must be > 0");
}

std::optional<SpeedEstimate> SpeedTracker::update(const RangeSample& sample) {
  if (history_.size() < static_cast<std::size_t>(baseline_frames_)) {
    if (!history_.empty() && sample.timestamp_ns <= history_.back().timestamp_ns) {
      ++resets_;
      history_.clear();
    }
    history_.push_back(sample);
    return std::nullopt;
  }
  try {
    const SpeedEstimate est = estimate_speed(history_.front(), sample, max_plausible_mps_);
    history_.pop_front();
    history_.push_back(sample);
    return est;
  } catch (const ClockError&) {
  } catch (const OutlierError&) {
  }
  ++resets_;
  history_.clear();
  history_.push_back(sample);
  return std::nullopt;
}

}  // namespace tma::ranging
