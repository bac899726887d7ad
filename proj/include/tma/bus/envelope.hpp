#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tma::bus {

struct Envelope {
  std::string topic;
  std::uint64_t seq = 0;
  std::uint64_t timestamp_ns = 0;
  std::vector<std::uint8_t> payload;

  bool operator==(const Envelope&) const = default;
};

// Wire frame, all integers big-endian:
//   u32 frame_length (bytes that follow, <= kMaxFrameLength)
//   u16 topic_length, topic bytes (UTF-8)
//   u64 seq, u64 timestamp_ns
//   payload (rest of the frame)
inline constexpr std::size_t kFrameLengthBytes = 4;
inline constexpr std::size_t kMaxFrameLength = 16u * 1024u * 1024u;
inline constexpr std::size_t kFixedBodyBytes = 2 + 8 + 8;

/// Malformed frame; field() is the first field that could not be read
/// ("frame_length", "topic_length", "topic", "seq", "timestamp_ns").
class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

bool is_valid_utf8(std::string_view text);
/// Non-empty, valid UTF-8, no C0/C1 control characters or DEL, <= 65535 bytes.
bool is_valid_topic(std::string_view topic);

/// Throws std::invalid_argument on an invalid topic and std::length_error
/// when the frame would exceed kMaxFrameLength.
std::vector<std::uint8_t> encode_envelope(const Envelope& envelope);

/// Decodes exactly one complete frame (including its length prefix).
Envelope decode_envelope(std::span<const std::uint8_t> frame);

/// Splits a byte stream into frames. Validates the length prefix as soon as
/// it arrives so an oversized frame is rejected before buffering it.
class FrameAssembler {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete frame, or nullopt if more bytes are needed.
  /// Throws DecodeError on an over-length prefix.
  std::optional<std::vector<std::uint8_t>> next_frame();
  std::size_t buffered() const { return buffer_.size() - consumed_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t consumed_ = 0;
};

}  // namespace tma::bus
