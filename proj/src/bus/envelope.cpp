#include "tma/bus/envelope.hpp"

#include <fmt/format.h>

namespace tma::bus {
namespace {

void put_be(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_be(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | p[i];
  return v;
}

// Decodes one code point starting at s[i]; returns its length or 0 if invalid.
std::size_t utf8_sequence(std::string_view s, std::size_t i, std::uint32_t& cp) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  std::uint32_t min = 0;
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, cp = b0 & 0x07, min = 0x10000;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  return len;
}

}  // namespace

bool is_valid_utf8(std::string_view text) {
  std::uint32_t cp = 0;
  for (std::size_t i = 0; i < text.size();) {
    const std::size_t n = utf8_sequence(text, i, cp);
    if (n == 0) return false;
    i += n;
  }
  return true;
}

bool is_valid_topic(std::string_view topic) {
  if (topic.empty() || topic.size() > 0xFFFF) return false;
  std::uint32_t cp = 0;
  for (std::size_t i = 0; i < topic.size();) {
    const std::size_t n = utf8_sequence(topic, i, cp);
    if (n == 0) return false;
    if (cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp <= 0x9F)) return false;
    i += n;
  }
  return true;
}

std::vector<std::uint8_t> encode_envelope(const Envelope& e) {
  if (!is_valid_topic(e.topic)) {
    throw std::invalid_argument(fmt::format("invalid topic '{}'", e.topic));
  }
  const std::size_t body = kFixedBodyBytes + e.topic.size() + e.payload.size();
  if (body > kMaxFrameLength) {
    throw std::length_error(fmt::format("frame of {} bytes exceeds the {} byte limit", body,
                                        kMaxFrameLength));
  }
  std::vector<std::uint8_t> out;
  out.reserve(kFrameLengthBytes + body);
  put_be(out, body, 4);
  put_be(out, e.topic.size(), 2);
  out.insert(out.end(), e.topic.begin(), e.topic.end());
  put_be(out, e.seq, 8);
  put_be(out, e.timestamp_ns, 8);
  out.insert(out.end(), e.payload.begin(), e.payload.end());
  return out;
}

Envelope decode_envelope(std::span<const std::uint8_t> frame) {
  if (frame.size() < kFrameLengthBytes) throw DecodeError("frame_length", "truncated");
  const std::uint64_t length = get_be(frame.data(), 4);
  if (length > kMaxFrameLength) {
    throw DecodeError("frame_length", fmt::format("{} exceeds the {} byte limit", length, kMaxFrameLength));
  }
  if (frame.size() - kFrameLengthBytes != length) {
    throw DecodeError("frame_length", fmt::format("declares {} bytes but {} follow", length,
                                                  frame.size() - kFrameLengthBytes));
  }
  const auto body = frame.subspan(kFrameLengthBytes);
  if (body.size() < 2) throw DecodeError("topic_length", "truncated");
  const std::size_t topic_len = get_be(body.data(), 2);
  if (body.size() < 2 + topic_len) throw DecodeError("topic", "truncated");
  Envelope e;
  e.topic.assign(reinterpret_cast<const char*>(body.data() + 2), topic_len);
  if (!is_valid_topic(e.topic)) throw DecodeError("topic", "empty, not UTF-8, or has control characters");
  std::size_t pos = 2 + topic_len;
  if (body.size() < pos + 8) throw DecodeError("seq", "truncated");
  e.seq = get_be(body.data() + pos, 8);
  pos += 8;
  if (body.size() < pos + 8) throw DecodeError("timestamp_ns", "truncated");
  e.timestamp_ns = get_be(body.data() + pos, 8);
  pos += 8;
  e.payload.assign(body.begin() + static_cast<std::ptrdiff_t>(pos), body.end());
  return e;
}

void FrameAssembler::feed(std::span<const std::uint8_t> bytes) {
  if (consumed_ > 0 && consumed_ >= buffer_.size() / 2) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(consumed_));
    consumed_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<std::vector<std::uint8_t>> FrameAssembler::next_frame() {
  const std::size_t available = buffer_.size() - consumed_;
  if (available < kFrameLengthBytes) return std::nullopt;
  const std::uint64_t length = get_be(buffer_.data() + consumed_, 4);
  if (length > kMaxFrameLength) {
    throw DecodeError("frame_length", fmt::format("{} exceeds the {} byte limit", length, kMaxFrameLength));
  }
  if (available < kFrameLengthBytes + length) return std::nullopt;
  const auto begin = buffer_.begin() + static_cast<std::ptrdiff_t>(consumed_);
  std::vector<std::uint8_t> frame(begin, begin + static_cast<std::ptrdiff_t>(kFrameLengthBytes + length));
  consumed_ += kFrameLengthBytes + length;
  return frame;
}

}  // namespace tma::bus
