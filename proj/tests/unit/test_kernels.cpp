#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "tma/kernels/depth_sum.hpp"
#include "tma/kernels/isa.hpp"
#include "tma/kernels/median.hpp"

using namespace tma::kernels;

namespace {

// Direct definition: gather the clamped neighbourhood and take the middle value.
std::vector<std::uint8_t> naive_median(const std::vector<std::uint8_t>& src, int w, int h, int k) {
  std::vector<std::uint8_t> dst(src.size());
  const int r = k / 2;
  std::vector<std::uint8_t> window;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      window.clear();
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = std::clamp(y + dy, 0, h - 1);
          const int xx = std::clamp(x + dx, 0, w - 1);
          window.push_back(src[static_cast<std::size_t>(yy * w + xx)]);
        }
      }
      std::sort(window.begin(), window.end());
      dst[static_cast<std::size_t>(y * w + x)] = window[window.size() / 2];
    }
  }
  return dst;
}

std::vector<std::uint8_t> random_image(std::mt19937& rng, int w, int h, bool binary) {
  std::uniform_int_distribution<int> value(0, 255);
  std::bernoulli_distribution on(0.3);
  std::vector<std::uint8_t> img(static_cast<std::size_t>(w * h));
  for (auto& p : img) p = binary ? (on(rng) ? 255 : 0) : static_cast<std::uint8_t>(value(rng));
  return img;
}

}  // namespace

TEST_CASE("scalar is always supported and listed first") {
  const auto isas = supported_isas();
  REQUIRE_FALSE(isas.empty());
  CHECK(isas.front() == Isa::kScalar);
  CHECK(isa_supported(Isa::kScalar));
  CHECK(parse_isa("avx2") == Isa::kAvx2);
  CHECK_THROWS_AS(parse_isa("sse9"), std::invalid_argument);
}

TEST_CASE("forcing an unsupported variant is rejected") {
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (!isa_supported(isa)) CHECK_THROWS_AS(set_active_isa(isa), std::invalid_argument);
  }
  const Isa before = active_isa();
  set_active_isa(Isa::kScalar);
  CHECK(active_isa() == Isa::kScalar);
  set_active_isa(before);
}

TEST_CASE("3x3 median variants match the naive definition") {
  std::mt19937 rng(42);
  const int sizes[][2] = {{3, 3}, {4, 7}, {31, 5}, {32, 3}, {33, 9}, {65, 17}, {100, 40}, {640, 12}};
  for (const auto& s : sizes) {
    for (bool binary : {false, true}) {
      const int w = s[0], h = s[1];
      const auto src = random_image(rng, w, h, binary);
      const auto expected = naive_median(src, w, h, 3);
      for (Isa isa : supported_isas()) {
        CAPTURE(to_string(isa));
        CAPTURE(w);
        CAPTURE(h);
        std::vector<std::uint8_t> dst(src.size());
        median_filter(src, dst, w, h, 3, isa);
        CHECK(dst == expected);
      }
    }
  }
}

TEST_CASE("generic median handles larger kernels") {
  std::mt19937 rng(7);
  for (int k : {5, 7}) {
    const int w = 23, h = 11;
    const auto src = random_image(rng, w, h, false);
    std::vector<std::uint8_t> dst(src.size());
    scalar::median_filter(src, dst, w, h, k);
    CHECK(dst == naive_median(src, w, h, k));
    for (Isa isa : supported_isas()) {
      std::vector<std::uint8_t> via_dispatch(src.size());
      median_filter(src, via_dispatch, w, h, k, isa);
      CHECK(via_dispatch == dst);
    }
  }
}

TEST_CASE("median rejects even and oversized kernels") {
  std::vector<std::uint8_t> src(25), dst(25);
  CHECK_THROWS_AS(median_filter(src, dst, 5, 5, 4, Isa::kScalar), std::invalid_argument);
  CHECK_THROWS_AS(median_filter(src, dst, 5, 5, 7, Isa::kScalar), std::invalid_argument);
  CHECK_THROWS_AS(median_filter(src, dst, 5, 5, 1, Isa::kScalar), std::invalid_argument);
}

TEST_CASE("valid-depth sum skips zero, negative and non-finite values") {
  const float nan = std::numeric_limits<float>::quiet_NaN();
  const float inf = std::numeric_limits<float>::infinity();
  const std::vector<float> values{1.0f, 0.0f, -2.0f, nan, inf, 2.5f, -inf, 0.5f};
  for (Isa isa : supported_isas()) {
    const DepthSum s = sum_valid_depth(values, isa);
    CHECK(s.count == 3);
    CHECK(s.sum == doctest::Approx(4.0));
  }
}

TEST_CASE("depth sum variants agree with the scalar reference") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> depth(-1.0f, 30.0f);
  std::bernoulli_distribution invalid(0.1);
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 31u, 64u, 1000u, 4099u}) {
    std::vector<float> values(n);
    for (auto& v : values) v = invalid(rng) ? std::numeric_limits<float>::quiet_NaN() : depth(rng);
    const DepthSum ref = scalar::sum_valid_depth(values);
    for (Isa isa : supported_isas()) {
      CAPTURE(n);
      const DepthSum s = sum_valid_depth(values, isa);
      CHECK(s.count == ref.count);
      CHECK(s.sum == doctest::Approx(ref.sum).epsilon(1e-12));
    }
  }
}
