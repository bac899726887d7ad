#pragma once

#include <cstdint>
#include <span>

#include "tma/kernels/isa.hpp"

namespace tma::kernels {

// All median filters replicate edge rows/columns. src and dst are row-major
// width*height buffers and must not alias.

/// Dispatching entry point: 3x3 goes through the sorting-network kernels,
/// other odd sizes through the generic scalar path.
void median_filter(std::span<const std::uint8_t> src, std::span<std::uint8_t> dst, int width,
                   int height, int kernel, Isa isa);

inline void median_filter(std::span<const std::uint8_t> src, std::span<std::uint8_t> dst,
                          int width, int height, int kernel) {
  median_filter(src, dst, width, height, kernel, active_isa());
}

namespace scalar {
/// Reference: gathers each kxk window and selects the middle element.
void median_filter(std::span<const std::uint8_t> src, std::span<std::uint8_t> dst, int width,
                   int height, int kernel);
void median3x3(std::span<const std::uint8_t> src, std::span<std::uint8_t> dst, int width,
               int height);
}  // namespace scalar

namespace avx2 {
void median3x3(std::span<const std::uint8_t> src, std::span<std::uint8_t> dst, int width,
               int height);
}  // namespace avx2

namespace neon {
void median3x3(std::span<const std::uint8_t> src, std::span<std::uint8_t> dst, int width,
               int height);
}  // namespace neon

}  // namespace tma::kernels
