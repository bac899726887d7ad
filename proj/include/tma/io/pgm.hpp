#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tma/image.hpp"

namespace tma::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary PGM (P5). maxval <= 255 gives one byte per sample, otherwise two
/// bytes big-endian.
struct Pgm {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint16_t> samples;
};

std::vector<std::uint8_t> encode_pgm(const Pgm& image);
Pgm decode_pgm(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_mask_pgm(const GrayImage& mask);
GrayImage decode_mask_pgm(std::span<const std::uint8_t> bytes);

/// Depth quantized to integer multiples of unit_m; invalid pixels become 0.
/// Throws FormatError when a depth does not fit in 16 bits.
std::vector<std::uint8_t> encode_depth_pgm(const DepthImage& depth, double unit_m);
DepthImage decode_depth_pgm(std::span<const std::uint8_t> bytes, double unit_m);

/// The single conversion from quantized units to the float depth value.
/// Anything producing quantized depth goes through this, so round trips
/// through the 16-bit format are bit-identical.
inline float dequantize_depth(std::uint16_t units, double unit_m) {
  return static_cast<float>(static_cast<double>(units) * unit_m);
}

/// Nearest quantum, clamped at 0 for invalid/non-positive input.
/// Throws FormatError above 65535 units.
std::uint16_t quantize_depth(float depth_m, double unit_m);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace tma::io
