#include "tma/io/pgm.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include <fmt/format.h>

namespace tma::io {
namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int read_int(const char* what) {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > std::numeric_limits<int>::max()) {
        throw FormatError(fmt::format("pgm: {} out of range", what));
      }
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw FormatError(fmt::format("pgm: missing {}", what));
    return static_cast<int>(value);
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_pgm(const Pgm& image) {
  if (image.width <= 0 || image.height <= 0 || image.maxval <= 0 || image.maxval > 65535) {
    throw FormatError("pgm: invalid dimensions or maxval");
  }
  const auto n = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height);
  if (image.samples.size() != n) throw FormatError("pgm: sample count mismatch");
  const std::string header = fmt::format("P5\n{} {}\n{}\n", image.width, image.height, image.maxval);
  const bool wide = image.maxval > 255;
  std::vector<std::uint8_t> out;
  out.reserve(header.size() + n * (wide ? 2 : 1));
  out.insert(out.end(), header.begin(), header.end());
  for (std::uint16_t s : image.samples) {
    if (s > image.maxval) throw FormatError("pgm: sample exceeds maxval");
    if (wide) out.push_back(static_cast<std::uint8_t>(s >> 8));
    out.push_back(static_cast<std::uint8_t>(s & 0xFF));
  }
  return out;
}

Pgm decode_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError("pgm: missing P5 magic");
  }
  HeaderReader reader(bytes);
  reader.advance(2);
  Pgm image;
  image.width = reader.read_int("width");
  image.height = reader.read_int("height");
  image.maxval = reader.read_int("maxval");
  if (image.width <= 0 || image.height <= 0) throw FormatError("pgm: non-positive dimensions");
  if (image.maxval <= 0 || image.maxval > 65535) throw FormatError("pgm: maxval out of range");
  // Exactly one whitespace byte separates the header from the raster.
  if (reader.pos() >= bytes.size() || !std::isspace(bytes[reader.pos()])) {
    throw FormatError("pgm: truncated header");
  }
  reader.advance(1);
  const bool wide = image.maxval > 255;
  const auto n = static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height);
  const std::size_t need = n * (wide ? 2 : 1);
  if (bytes.size() - reader.pos() != need) {
    throw FormatError(fmt::format("pgm: raster is {} bytes, expected {}",
                                  bytes.size() - reader.pos(), need));
  }
  image.samples.resize(n);
  const std::uint8_t* p = bytes.data() + reader.pos();
  for (std::size_t i = 0; i < n; ++i) {
    image.samples[i] = wide ? static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]) : p[i];
  }
  return image;
}

std::vector<std::uint8_t> encode_mask_pgm(const GrayImage& mask) {
  Pgm pgm{mask.width(), mask.height(), 255, {}};
  pgm.samples.assign(mask.pixels().begin(), mask.pixels().end());
  return encode_pgm(pgm);
}

GrayImage decode_mask_pgm(std::span<const std::uint8_t> bytes) {
  Pgm pgm = decode_pgm(bytes);
  if (pgm.maxval > 255) throw FormatError("pgm: mask must be 8-bit");
  std::vector<std::uint8_t> px(pgm.samples.begin(), pgm.samples.end());
  return GrayImage(pgm.width, pgm.height, std::move(px));
}

std::uint16_t quantize_depth(float depth_m, double unit_m) {
  if (!std::isfinite(depth_m) || depth_m <= 0.0f) return 0;
  const double units = std::nearbyint(static_cast<double>(depth_m) / unit_m);
  if (units > 65535.0) {
    throw FormatError(fmt::format("depth {} m exceeds the 16-bit range at unit {} m", depth_m,
                                  unit_m));
  }
  return static_cast<std::uint16_t>(units);
}

std::vector<std::uint8_t> encode_depth_pgm(const DepthImage& depth, double unit_m) {
  Pgm pgm{depth.width(), depth.height(), 65535, {}};
  pgm.samples.reserve(depth.pixels().size());
  for (float d : depth.pixels()) pgm.samples.push_back(quantize_depth(d, unit_m));
  return encode_pgm(pgm);
}

DepthImage decode_depth_pgm(std::span<const std::uint8_t> bytes, double unit_m) {
  Pgm pgm = decode_pgm(bytes);
  if (pgm.maxval <= 255) throw FormatError("pgm: depth must be 16-bit");
  std::vector<float> d(pgm.samples.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = dequantize_depth(pgm.samples[i], unit_m);
  return DepthImage(pgm.width, pgm.height, std::move(d));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error(fmt::format("write failed for '{}'", path.string()));
  }
  std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace tma::io
