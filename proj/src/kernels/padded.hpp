#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <span>
#include <vector>

namespace tma::kernels::detail {

inline void check_median_args(std::span<const std::uint8_t> src, std::span<std::uint8_t> dst,
                              int width, int height, int kernel) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("median filter: image dimensions must be positive");
  }
  const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (src.size() != n || dst.size() != n) {
    throw std::invalid_argument("median filter: buffer size does not match dimensions");
  }
  if (kernel < 3 || kernel % 2 == 0) {
    throw std::invalid_argument("median filter: kernel must be odd and >= 3");
  }
  if (kernel > std::min(width, height)) {
    throw std::invalid_argument("median filter: kernel larger than image");
  }
}

// Copy of a width*height image with `border` replicated pixels on every side.
inline std::vector<std::uint8_t> pad_replicate(std::span<const std::uint8_t> src, int width,
                                               int height, int border) {
  const int pw = width + 2 * border;
  const int ph = height + 2 * border;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(pw) * ph);
  for (int py = 0; py < ph; ++py) {
    int sy = py - border;
    sy = sy < 0 ? 0 : (sy >= height ? height - 1 : sy);
    const std::uint8_t* row = src.data() + static_cast<std::size_t>(sy) * width;
    std::uint8_t* dst = out.data() + static_cast<std::size_t>(py) * pw;
    for (int px = 0; px < border; ++px) dst[px] = row[0];
    for (int x = 0; x < width; ++x) dst[border + x] = row[x];
    for (int px = border + width; px < pw; ++px) dst[px] = row[width - 1];
  }
  return out;
}

// Median-of-9 exchange network (19 compare-exchanges over p[0..8], median
// ends in p[4]). Expanded through a macro so SIMD kernels can instantiate it
// inside their own target-attributed function bodies.
#define TMA_MEDIAN9_EXCHANGES(X)                \
  X(1, 2) X(4, 5) X(7, 8) X(0, 1) X(3, 4) X(6, 7) \
  X(1, 2) X(4, 5) X(7, 8) X(0, 3) X(5, 8) X(4, 7) \
  X(3, 6) X(1, 4) X(2, 5) X(4, 7) X(4, 2) X(6, 4) \
  X(4, 2)

inline std::uint8_t median9(std::uint8_t p[9]) {
#define TMA_SORT2(a, b)                               \
  {                                                   \
    const std::uint8_t lo = std::min(p[a], p[b]);     \
    p[b] = std::max(p[a], p[b]);                      \
    p[a] = lo;                                        \
  }
  TMA_MEDIAN9_EXCHANGES(TMA_SORT2)
#undef TMA_SORT2
  return p[4];
}

// Scalar 3x3 median for columns [x_begin, width) of one output row, reading
// three consecutive rows of a 1-pixel replicate-padded image.
inline void median3x3_row_tail(const std::uint8_t* r0, const std::uint8_t* r1,
                               const std::uint8_t* r2, std::uint8_t* out, int x_begin,
                               int width) {
  for (int x = x_begin; x < width; ++x) {
    std::uint8_t p[9] = {r0[x], r0[x + 1], r0[x + 2], r1[x], r1[x + 1],
                         r1[x + 2], r2[x], r2[x + 1], r2[x + 2]};
    out[x] = median9(p);
  }
}

}  // namespace tma::kernels::detail
