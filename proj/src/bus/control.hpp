#pragma once

// Control messages exchanged between TcpClient and Broker. They are ordinary
// envelopes on reserved topics so they share the data framing.
//   $subscribe    payload: u8 kind (0 lossless, 1 keep_last), u32 depth, u32 id, topic
//   $unsubscribe  payload: u32 id
//   $suback       payload: u32 id, u8 has_retained, [retained frame bytes]

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tma/bus/bus.hpp"

namespace tma::bus::detail {

inline constexpr const char* kSubscribeTopic = "$subscribe";
inline constexpr const char* kUnsubscribeTopic = "$unsubscribe";
inline constexpr const char* kSubackTopic = "$suback";

struct SubscribeRequest {
  std::uint32_t id = 0;
  TopicQos qos;
  std::string topic;
};

std::vector<std::uint8_t> encode_subscribe(const SubscribeRequest& request);
/// nullopt when malformed.
std::optional<SubscribeRequest> decode_subscribe(const std::vector<std::uint8_t>& payload);

std::vector<std::uint8_t> encode_id(std::uint32_t id);
std::optional<std::uint32_t> decode_id(const std::vector<std::uint8_t>& payload);

struct Suback {
  std::uint32_t id = 0;
  std::optional<Envelope> retained;
};

std::vector<std::uint8_t> encode_suback(std::uint32_t id, const std::vector<std::uint8_t>* retained_frame);
/// Throws DecodeError when malformed.
Suback decode_suback(const std::vector<std::uint8_t>& payload);

}  // namespace tma::bus::detail
