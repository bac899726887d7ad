#include "tma/geometry/lanes.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tma/kernels/median.hpp"

namespace tma::geometry {

std::string_view to_string(LaneAssignment lane) {
  switch (lane) {
    case LaneAssignment::kLeft:
      return "left";
    case LaneAssignment::kRight:
      return "right";
    case LaneAssignment::kOutside:
      return "outside";
    case LaneAssignment::kUnknown:
      return "unknown";
  }
  return "unknown";
}

LaneAssignment parse_lane(std::string_view name) {
  if (name == "left") return LaneAssignment::kLeft;
  if (name == "right") return LaneAssignment::kRight;
  if (name == "outside") return LaneAssignment::kOutside;
  if (name == "unknown") return LaneAssignment::kUnknown;
  throw std::invalid_argument("unknown lane '" + std::string(name) + "'");
}

GrayImage median_blur(const GrayImage& image, int kernel) {
  GrayImage out(image.width(), image.height());
  kernels::median_filter(image.pixels(), out.pixels(), image.width(), image.height(), kernel);
  return out;
}

namespace {

class DisjointSets {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Lower label wins so roots stay at their first raster pixel.
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

std::vector<Component> connected_components(const GrayImage& image, std::size_t min_area) {
  const int w = image.width();
  const int h = image.height();
  std::vector<int> labels(static_cast<std::size_t>(w) * h, -1);
  DisjointSets sets;
  auto label_at = [&](int x, int y) { return labels[static_cast<std::size_t>(y) * w + x]; };

  // First pass: provisional labels from the already-visited 8-neighbours
  // (W, NW, N, NE).
  for (int y = 0; y < h; ++y) {
    const auto row = image.row(y);
    for (int x = 0; x < w; ++x) {
      if (row[x] == 0) continue;
      int label = -1;
      const int neighbours[4][2] = {{x - 1, y}, {x - 1, y - 1}, {x, y - 1}, {x + 1, y - 1}};
      for (const auto& n : neighbours) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= w) continue;
        const int other = label_at(n[0], n[1]);
        if (other < 0) continue;
        if (label < 0) {
          label = other;
        } else {
          sets.unite(label, other);
        }
      }
      labels[static_cast<std::size_t>(y) * w + x] = label < 0 ? sets.make() : label;
    }
  }

  // Second pass: gather pixels per root. Raster order keeps pixel lists
  // sorted and makes the first pixel of each component its smallest (y, x).
  std::vector<int> slot_of_root;
  std::vector<Component> all;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int label = label_at(x, y);
      if (label < 0) continue;
      const int root = sets.find(label);
      if (static_cast<std::size_t>(root) >= slot_of_root.size()) {
        slot_of_root.resize(static_cast<std::size_t>(root) + 1, -1);
      }
      if (slot_of_root[root] < 0) {
        slot_of_root[root] = static_cast<int>(all.size());
        all.emplace_back();
      }
      all[slot_of_root[root]].pixels.push_back({x, y});
    }
  }

  std::vector<Component> kept;
  for (auto& c : all) {
    if (c.area() >= min_area) kept.push_back(std::move(c));
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Component& a, const Component& b) {
    return a.area() > b.area();  // components are already in first-pixel order
  });
  return kept;
}

LaneLine fit_lane_line(const Component& component) {
  if (component.pixels.empty()) throw DegenerateComponent("empty component");
  int y_min = component.pixels.front().y;
  int y_max = y_min;
  for (const auto& p : component.pixels) {
    y_min = std::min(y_min, p.y);
    y_max = std::max(y_max, p.y);
  }
  if (y_max == y_min) {
    throw DegenerateComponent("component spans a single row (y = " + std::to_string(y_min) + ")");
  }
  double sum_top = 0.0;
  double sum_bottom = 0.0;
  std::size_t n_top = 0;
  std::size_t n_bottom = 0;
  for (const auto& p : component.pixels) {
    if (p.y == y_min) {
      sum_top += p.x;
      ++n_top;
    } else if (p.y == y_max) {
      sum_bottom += p.x;
      ++n_bottom;
    }
  }
  const double x_top = sum_top / static_cast<double>(n_top);
  const double x_bottom = sum_bottom / static_cast<double>(n_bottom);
  LaneLine line;
  line.slope = (x_bottom - x_top) / static_cast<double>(y_max - y_min);
  line.intercept = x_top - line.slope * y_min;
  line.source_area = component.area();
  return line;
}

std::optional<LaneSet> label_lanes(std::span<const LaneLine> lines, int image_height) {
  if (lines.size() < 3) return std::nullopt;
  std::vector<LaneLine> largest(lines.begin(), lines.end());
  std::stable_sort(largest.begin(), largest.end(), [](const LaneLine& a, const LaneLine& b) {
    return a.source_area > b.source_area;
  });
  largest.resize(3);
  const double y_bottom = image_height - 1;
  std::sort(largest.begin(), largest.end(), [&](const LaneLine& a, const LaneLine& b) {
    return a.x_at(y_bottom) < b.x_at(y_bottom);
  });
  if (!(largest[0].x_at(y_bottom) < largest[1].x_at(y_bottom) &&
        largest[1].x_at(y_bottom) < largest[2].x_at(y_bottom))) {
    return std::nullopt;
  }
  return LaneSet{largest[0], largest[1], largest[2]};
}

LaneAssignment assign_lane(const BoundingBox& box, const LaneSet& lanes) {
  const double xc = box.center_x();
  const double yc = box.center_y();
  const double x_left = lanes.left.x_at(yc);
  const double x_medium = lanes.medium.x_at(yc);
  const double x_right = lanes.right.x_at(yc);
  if (x_left <= xc && xc < x_medium) return LaneAssignment::kLeft;
  if (x_medium <= xc && xc < x_right) return LaneAssignment::kRight;
  return LaneAssignment::kOutside;
}

std::optional<LaneSet> detect_lanes(const GrayImage& mask, const LaneDetectorParams& params) {
  const GrayImage smoothed = median_blur(mask, params.median_kernel);
  std::vector<LaneLine> lines;
  for (const auto& component : connected_components(smoothed, params.min_area)) {
    try {
      lines.push_back(fit_lane_line(component));
    } catch (const DegenerateComponent&) {
      // horizontal blobs carry no slope information
    }
  }
  return label_lanes(lines, mask.height());
}

}  // namespace tma::geometry
