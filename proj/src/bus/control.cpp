#include "bus/control.hpp"

#include <span>

#include "bus/socket.hpp"

namespace tma::bus::detail {

std::vector<std::uint8_t> encode_subscribe(const SubscribeRequest& request) {
  std::vector<std::uint8_t> out(9);
  out[0] = request.qos.is_lossless() ? 0 : 1;
  put_u32(out.data() + 1, static_cast<std::uint32_t>(request.qos.depth));
  put_u32(out.data() + 5, request.id);
  out.insert(out.end(), request.topic.begin(), request.topic.end());
  return out;
}

std::optional<SubscribeRequest> decode_subscribe(const std::vector<std::uint8_t>& payload) {
  if (payload.size() < 10 || payload[0] > 1) return std::nullopt;
  SubscribeRequest r;
  const std::uint32_t depth = get_u32(payload.data() + 1);
  if (payload[0] == 1) {
    if (depth == 0) return std::nullopt;
    r.qos = TopicQos::keep_last(depth);
  }
  r.id = get_u32(payload.data() + 5);
  r.topic.assign(payload.begin() + 9, payload.end());
  if (!is_valid_topic(r.topic) || r.topic.front() == '$') return std::nullopt;
  return r;
}

std::vector<std::uint8_t> encode_id(std::uint32_t id) {
  std::vector<std::uint8_t> out(4);
  put_u32(out.data(), id);
  return out;
}

std::optional<std::uint32_t> decode_id(const std::vector<std::uint8_t>& payload) {
  if (payload.size() != 4) return std::nullopt;
  return get_u32(payload.data());
}

std::vector<std::uint8_t> encode_suback(std::uint32_t id, const std::vector<std::uint8_t>* retained_frame) {
  std::vector<std::uint8_t> out(5);
  put_u32(out.data(), id);
  out[4] = retained_frame ? 1 : 0;
  if (retained_frame) out.insert(out.end(), retained_frame->begin(), retained_frame->end());
  return out;
}

Suback decode_suback(const std::vector<std::uint8_t>& payload) {
  if (payload.size() < 5 || payload[4] > 1) throw DecodeError("suback", "malformed");
  Suback s;
  s.id = get_u32(payload.data());
  if (payload[4] == 1) {
    s.retained = decode_envelope(std::span(payload).subspan(5));
  } else if (payload.size() != 5) {
    throw DecodeError("suback", "trailing bytes");
  }
  return s;
}

}  // namespace tma::bus::detail
