#include <cmath>
#include <stdexcept>

#include "tma/kernels/depth_sum.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define TMA_KERNELS_X86 1
#endif
#if defined(__aarch64__)
#include <arm_neon.h>
#endif

namespace tma::kernels {

namespace scalar {
DepthSum sum_valid_depth(std::span<const float> values) {
  DepthSum out;
  for (float v : values) {
    if (std::isfinite(v) && v > 0.0f) {
      out.sum += static_cast<double>(v);
      ++out.count;
    }
  }
  return out;
}
}  // namespace scalar

namespace avx2 {
#if defined(TMA_KERNELS_X86)
__attribute__((target("avx2"))) DepthSum sum_valid_depth(std::span<const float> values) {
  const float* p = values.data();
  const std::size_t n = values.size();
  const __m256 zero = _mm256_setzero_ps();
  const __m256 inf = _mm256_set1_ps(INFINITY);
  __m256d acc_lo = _mm256_setzero_pd();
  __m256d acc_hi = _mm256_setzero_pd();
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(p + i);
    // Ordered compares: NaN fails both, +inf fails the second.
    const __m256 valid =
        _mm256_and_ps(_mm256_cmp_ps(v, zero, _CMP_GT_OQ), _mm256_cmp_ps(v, inf, _CMP_LT_OQ));
    const __m256 kept = _mm256_and_ps(v, valid);
    acc_lo = _mm256_add_pd(acc_lo, _mm256_cvtps_pd(_mm256_castps256_ps128(kept)));
    acc_hi = _mm256_add_pd(acc_hi, _mm256_cvtps_pd(_mm256_extractf128_ps(kept, 1)));
    count += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_ps(valid)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc_lo, acc_hi));
  DepthSum out{lanes[0] + lanes[1] + lanes[2] + lanes[3], count};
  out += scalar::sum_valid_depth(values.subspan(i));
  return out;
}
#else
DepthSum sum_valid_depth(std::span<const float>) {
  throw std::logic_error("AVX2 depth kernel not built for this architecture");
}
#endif
}  // namespace avx2

namespace neon {
#if defined(__aarch64__)
DepthSum sum_valid_depth(std::span<const float> values) {
  const float* p = values.data();
  const std::size_t n = values.size();
  const float32x4_t zero = vdupq_n_f32(0.0f);
  const float32x4_t inf = vdupq_n_f32(INFINITY);
  float64x2_t acc_lo = vdupq_n_f64(0.0);
  float64x2_t acc_hi = vdupq_n_f64(0.0);
  uint32x4_t counts = vdupq_n_u32(0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t v = vld1q_f32(p + i);
    const uint32x4_t valid = vandq_u32(vcgtq_f32(v, zero), vcltq_f32(v, inf));
    const float32x4_t kept =
        vreinterpretq_f32_u32(vandq_u32(vreinterpretq_u32_f32(v), valid));
    acc_lo = vaddq_f64(acc_lo, vcvt_f64_f32(vget_low_f32(kept)));
    acc_hi = vaddq_f64(acc_hi, vcvt_high_f64_f32(kept));
    counts = vsubq_u32(counts, valid);  // valid lanes are all-ones (-1)
  }
  DepthSum out{vaddvq_f64(vaddq_f64(acc_lo, acc_hi)), vaddvq_u32(counts)};
  out += scalar::sum_valid_depth(values.subspan(i));
  return out;
}
#else
DepthSum sum_valid_depth(std::span<const float>) {
  throw std::logic_error("NEON depth kernel not built for this architecture");
}
#endif
}  // namespace neon

DepthSum sum_valid_depth(std::span<const float> values, Isa isa) {
  switch (isa) {
    case Isa::kAvx2:
      return avx2::sum_valid_depth(values);
    case Isa::kNeon:
      return neon::sum_valid_depth(values);
    case Isa::kScalar:
      break;
  }
  return scalar::sum_valid_depth(values);
}

}  // namespace tma::kernels
