#include <stdexcept>

#include "padded.hpp"
#include "tma/kernels/median.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define TMA_KERNELS_X86 1
#endif

namespace tma::kernels::avx2 {

#if defined(TMA_KERNELS_X86)

__attribute__((target("avx2"))) void median3x3(std::span<const std::uint8_t> src,
                                               std::span<std::uint8_t> dst, int width,
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
    // Loads reach x + 2 + 31 < width + 2.
    for (; x + 32 <= width; x += 32) {
      __m256i p[9];
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) p[r * 3 + c] = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(rows[r] + x + c));
      }
#define TMA_SORT2(a, b)                     \
  {                                         \
    const __m256i lo = _mm256_min_epu8(p[a], p[b]); \
    p[b] = _mm256_max_epu8(p[a], p[b]);           \
    p[a] = lo;                              \
  }
      TMA_MEDIAN9_EXCHANGES(TMA_SORT2)
#undef TMA_SORT2
      _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + x), p[4]);
    }
    detail::median3x3_row_tail(r0, r1, r2, out, x, width);
  }
}

#else

void median3x3(std::span<const std::uint8_t>, std::span<std::uint8_t>, int, int) {
  throw std::logic_error("AVX2 median kernel not built for this architecture");
}

#endif

}  // namespace tma::kernels::avx2
