#include <stdexcept>

#include "padded.hpp"
#include "tma/kernels/median.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>
#endif

namespace tma::kernels::neon {

#if defined(__aarch64__)

void median3x3(std::span<const std::uint8_t> src, std::span<std::uint8_t> dst, int width,
               int height) {
  detail::check_median_args(src, dst, width, height, 3);
  const auto padded = detail::pad_replicate(src, width, height, 1);
  const int pw = width + 2;
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* r0 = padded.data() + static_cast<std::size_t>(y) * pw;
    const std::uint8_t* r1 = r0 + pw;
    const std::uint8_t* r2 = r1 + pw;
    std::uint8_t* out = dst.data() + static_cast<std::size_t>(y) * width;
    const std::uint8_t* rows[3] = {r0, r1, r2};
    int x = 0;
    // Loads reach x + 2 + 15 < width + 2.
    for (; x + 16 <= width; x += 16) {
      uint8x16_t p[9];
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) p[r * 3 + c] = vld1q_u8(rows[r] + x + c);
      }
#define TMA_SORT2(a, b)                     \
  {                                         \
    const uint8x16_t lo = vminq_u8(p[a], p[b]); \
    p[b] = vmaxq_u8(p[a], p[b]);           \
    p[a] = lo;                              \
  }
      TMA_MEDIAN9_EXCHANGES(TMA_SORT2)
#undef TMA_SORT2
      vst1q_u8(out + x, p[4]);
    }
    detail::median3x3_row_tail(r0, r1, r2, out, x, width);
  }
}

#else

void median3x3(std::span<const std::uint8_t>, std::span<std::uint8_t>, int, int) {
  throw std::logic_error("NEON median kernel not built for this architecture");
}

#endif

}  // namespace tma::kernels::neon
