#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "tma/image.hpp"

namespace tma::geometry {

struct Pixel {
  int x = 0;
  int y = 0;
  bool operator==(const Pixel&) const = default;
};

/// 8-connected set of lane-line pixels, in raster order.
struct Component {
  std::vector<Pixel> pixels;
  std::size_t area() const { return pixels.size(); }
};

/// Lane boundary in image space with x expressed as a function of y:
/// x(y) = slope * y + intercept. Near-vertical lines stay finite.
struct LaneLine {
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t source_area = 0;

  double x_at(double y) const { return slope * y + intercept; }
};

struct LaneSet {
  LaneLine left;
  LaneLine medium;
  LaneLine right;
};

enum class LaneAssignment { kLeft, kRight, kOutside, kUnknown };

std::string_view to_string(LaneAssignment lane);
LaneAssignment parse_lane(std::string_view name);

class DegenerateComponent : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// kernel x kernel median with replicated edges. Throws std::invalid_argument
/// for even kernels, kernels < 3, or kernels larger than the image.
GrayImage median_blur(const GrayImage& image, int kernel = 3);

/// 8-connected components of nonzero pixels with area >= min_area, ordered by
/// descending area, ties broken by the smallest (y, x) pixel.
std::vector<Component> connected_components(const GrayImage& image, std::size_t min_area);

/// Line through the mean x of the component's top row and of its bottom row.
/// Throws DegenerateComponent if the component occupies a single row.
LaneLine fit_lane_line(const Component& component);

/// Keeps the three largest lines (by source area) and orders them by their
/// x at the bottom image row. Fewer than three lines, or lines that do not
/// separate at the bottom row, give std::nullopt (lanes unknown).
std::optional<LaneSet> label_lanes(std::span<const LaneLine> lines, int image_height);

/// Lane of the box center against the three boundaries evaluated at the
/// center's row. Ties go to the lane on the right of the boundary.
LaneAssignment assign_lane(const BoundingBox& box, const LaneSet& lanes);

struct LaneDetectorParams {
  int median_kernel = 3;
  std::size_t min_area = 500;
};

/// Full mask chain: median_blur -> connected_components -> fit_lane_line
/// (degenerate components skipped) -> label_lanes.
std::optional<LaneSet> detect_lanes(const GrayImage& mask, const LaneDetectorParams& params);

}  // namespace tma::geometry
