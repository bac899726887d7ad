#include <doctest.h>

#include <filesystem>
#include <string>

#include "tma/io/pgm.hpp"

using namespace tma;

TEST_CASE("8-bit mask PGM roundtrips") {
  GrayImage mask(4, 3, 0);
  mask.at(1, 2) = 255;
  mask.at(3, 0) = 7;
  const auto bytes = io::encode_mask_pgm(mask);
  const std::string head(bytes.begin(), bytes.begin() + 11);
  CHECK(head == "P5\n4 3\n255\n");
  CHECK(io::decode_mask_pgm(bytes) == mask);
}

TEST_CASE("PGM header comments are skipped") {
  const std::string text = "P5\n# made by hand\n2 1\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  bytes.push_back(9);
  bytes.push_back(10);
  const auto pgm = io::decode_pgm(bytes);
  CHECK(pgm.width == 2);
  CHECK(pgm.samples == std::vector<std::uint16_t>{9, 10});
}

TEST_CASE("16-bit depth PGM is big-endian in depth units with 0 = invalid") {
  DepthImage depth(2, 1, 0.0f);
  depth.at(0, 0) = 2.5f;
  const auto bytes = io::encode_depth_pgm(depth, 0.001);
  REQUIRE(bytes.size() >= 4);
  // 2500 mm = 0x09C4
  CHECK(bytes[bytes.size() - 4] == 0x09);
  CHECK(bytes[bytes.size() - 3] == 0xC4);
  CHECK(bytes[bytes.size() - 2] == 0x00);
  const auto back = io::decode_depth_pgm(bytes, 0.001);
  CHECK(back.at(0, 0) == doctest::Approx(2.5));
  CHECK(back.at(1, 0) == 0.0f);
}

TEST_CASE("quantization saturates loudly, not silently") {
  CHECK(io::quantize_depth(65.535f, 0.001) == 65535);
  CHECK_THROWS(io::quantize_depth(70.0f, 0.001));
  CHECK(io::quantize_depth(-1.0f, 0.001) == 0);
}

TEST_CASE("malformed PGMs are format errors") {
  auto bad = [](const std::string& s) {
    std::vector<std::uint8_t> b(s.begin(), s.end());
    CHECK_THROWS_AS(io::decode_pgm(b), io::FormatError);
  };
  bad("");
  bad("P2\n1 1\n255\n\x01");
  bad("P5\n2 2\n255\n\x01\x02");  // raster too short
  bad("P5\n0 2\n255\n");
  bad("P5\n1 1\n70000\n\x01\x02");
}

TEST_CASE("atomic writes leave no temporary file behind") {
  const auto dir = std::filesystem::temp_directory_path() / "tma_io_test";
  std::filesystem::create_directories(dir);
  io::write_file_atomic(dir / "a.txt", std::string("hello"));
  const auto bytes = io::read_file(dir / "a.txt");
  CHECK(std::string(bytes.begin(), bytes.end()) == "hello");
  CHECK_FALSE(std::filesystem::exists(dir / "a.txt.tmp"));
  std::filesystem::remove_all(dir);
}
