#pragma once

#include <cstddef>
#include <span>

#include "tma/kernels/isa.hpp"

namespace tma::kernels {

/// Sum and count of valid depth values (finite and strictly positive).
struct DepthSum {
  double sum = 0.0;
  std::size_t count = 0;

  DepthSum& operator+=(const DepthSum& other) {
    sum += other.sum;
    count += other.count;
    return *this;
  }
};

DepthSum sum_valid_depth(std::span<const float> values, Isa isa);

inline DepthSum sum_valid_depth(std::span<const float> values) {
  return sum_valid_depth(values, active_isa());
}

namespace scalar {
DepthSum sum_valid_depth(std::span<const float> values);
}
namespace avx2 {
DepthSum sum_valid_depth(std::span<const float> values);
}
namespace neon {
DepthSum sum_valid_depth(std::span<const float> values);
}

}  // namespace tma::kernels
