#include <algorithm>
#include <stdexcept>
#include <vector>

#include "padded.hpp"
#include "tma/kernels/median.hpp"

namespace tma::kernels {
using detail::check_median_args;

namespace scalar {

void median_filter(std::span<const std::uint8_t> src, std::span<std::uint8_t> dst, int width,
                   int height, int kernel) {
  check_median_args(src, dst, width, height, kernel);
  const int r = kernel / 2;
  std::vector<std::uint8_t> window(static_cast<std::size_t>(kernel) * kernel);
  const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::size_t i = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = std::clamp(y + dy, 0, height - 1);
        for (int dx = -r; dx <= r; ++dx) {
          const int sx = std::clamp(x + dx, 0, width - 1);
          window[i++] = src[static_cast<std::size_t>(sy) * width + sx];
        }
      }
      std::nth_element(window.begin(), mid, window.end());
      dst[static_cast<std::size_t>(y) * width + x] = *mid;
    }
  }
}

void median3x3(std::span<const std::uint8_t> src, std::span<std::uint8_t> dst, int width,
               int height) {
  check_median_args(src, dst, width, height, 3);
  const auto padded = detail::pad_replicate(src, width, height, 1);
  const int pw = width + 2;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* r0 = padded.data() + static_cast<std::size_t>(y) * pw;
    const std::uint8_t* r1 = r0 + pw;
    const std::uint8_t* r2 = r1 + pw;
    std::uint8_t* out = dst.data() + static_cast<std::size_t>(y) * width;
    detail::median3x3_row_tail(r0, r1, r2, out, 0, width);
  }
}

}  // namespace scalar

void median_filter(std::span<const std::uint8_t> src, std::span<std::uint8_t> dst, int width,
                   int height, int kernel, Isa isa) {
  if (kernel != 3) {
    scalar::median_filter(src, dst, width, height, kernel);
    return;
  }
  switch (isa) {
    case Isa::kAvx2:
      avx2::median3x3(src, dst, width, height);
      return;
    case Isa::kNeon:
      neon::median3x3(src, dst, width, height);
      return;
    case Isa::kScalar:
      break;
  }
  scalar::median3x3(src, dst, width, height);
}

}  // namespace tma::kernels
