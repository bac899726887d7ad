#include "tma/pipeline/frame.hpp"

#include <fmt/format.h>

#include "tma/io/pgm.hpp"

namespace tma {

using nlohmann::json;

json to_json(const BoundingBox& box) { return json::array({box.x_min, box.y_min, box.x_max, box.y_max}); }

BoundingBox bbox_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw io::FormatError("bbox must be [x_min, y_min, x_max, y_max]");
  return BoundingBox{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

json to_json(const Detection& d) {
  return json{{"bbox", to_json(d.box)}, {"label", d.label}, {"confidence", d.confidence}};
}

Detection detection_from_json(const json& j) {
  return Detection{bbox_from_json(j.at("bbox")), j.at("label").get<std::string>(),
                   j.at("confidence").get<double>()};
}

json to_json(const GroundTruth& t) {
  json j{{"distance_m", t.distance_m},
         {"speed_mps", t.speed_mps},
         {"lane", std::string(geometry::to_string(t.lane))},
         {"occluded", t.occluded}};
  j["bbox"] = t.bbox ? to_json(*t.bbox) : json(nullptr);
  return j;
}

GroundTruth truth_from_json(const json& j) {
  GroundTruth t;
  t.distance_m = j.at("distance_m").get<double>();
  t.speed_mps = j.at("speed_mps").get<double>();
  t.lane = geometry::parse_lane(j.at("lane").get<std::string>());
  t.occluded = j.at("occluded").get<bool>();
  if (!j.at("bbox").is_null()) t.bbox = bbox_from_json(j.at("bbox"));
  return t;
}

void validate_frame(const FrameBundle& frame) {
  if (frame.lane_mask.width() != frame.depth.width() ||
      frame.lane_mask.height() != frame.depth.height()) {
    throw io::FormatError(fmt::format("frame {}: mask {}x{} and depth {}x{} differ", frame.seq,
                                      frame.lane_mask.width(), frame.lane_mask.height(),
                                      frame.depth.width(), frame.depth.height()));
  }
  for (const auto& d : frame.detections) {
    if (!d.box.within(frame.lane_mask.width(), frame.lane_mask.height())) {
      throw io::FormatError(fmt::format("frame {}: detection box outside the image", frame.seq));
    }
  }
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in) {
  return (std::uint32_t{in[0]} << 24) | (std::uint32_t{in[1]} << 16) | (std::uint32_t{in[2]} << 8) |
         std::uint32_t{in[3]};
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const FrameBundle& frame,
                                       const std::optional<GroundTruth>& truth) {
  validate_frame(frame);
  const auto mask = io::encode_mask_pgm(frame.lane_mask);
  const auto depth = io::encode_depth_pgm(frame.depth, frame.depth_unit_m);
  json header{{"seq", frame.seq},
              {"timestamp_ns", frame.timestamp_ns},
              {"width", frame.lane_mask.width()},
              {"height", frame.lane_mask.height()},
              {"depth_unit_m", frame.depth_unit_m},
              {"mask_bytes", mask.size()},
              {"detections", json::array()}};
  for (const auto& d : frame.detections) header["detections"].push_back(to_json(d));
  if (truth) header["truth"] = to_json(*truth);
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(4 + text.size() + mask.size() + depth.size());
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), mask.begin(), mask.end());
  out.insert(out.end(), depth.begin(), depth.end());
  return out;
}

DecodedFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw io::FormatError("frame: truncated header length");
  const std::size_t header_len = get_u32(bytes);
  if (bytes.size() - 4 < header_len) throw io::FormatError("frame: truncated header");
  json header;
  try {
    header = json::parse(bytes.begin() + 4, bytes.begin() + 4 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw io::FormatError(fmt::format("frame: bad header ({})", e.what()));
  }
  try {
    DecodedFrame out;
    auto& f = out.bundle;
    f.seq = header.at("seq").get<std::uint64_t>();
    f.timestamp_ns = header.at("timestamp_ns").get<std::uint64_t>();
    f.depth_unit_m = header.at("depth_unit_m").get<double>();
    const std::size_t mask_bytes = header.at("mask_bytes").get<std::size_t>();
    const auto images = bytes.subspan(4 + header_len);
    if (images.size() < mask_bytes) throw io::FormatError("frame: truncated mask");
    f.lane_mask = io::decode_mask_pgm(images.first(mask_bytes));
    f.depth = io::decode_depth_pgm(images.subspan(mask_bytes), f.depth_unit_m);
    if (f.lane_mask.width() != header.at("width").get<int>() ||
        f.lane_mask.height() != header.at("height").get<int>()) {
      throw io::FormatError("frame: image size does not match header");
    }
    for (const auto& d : header.at("detections")) f.detections.push_back(detection_from_json(d));
    if (header.contains("truth")) out.truth = truth_from_json(header.at("truth"));
    validate_frame(f);
    return out;
  } catch (const json::exception& e) {
    throw io::FormatError(fmt::format("frame: bad header field ({})", e.what()));
  } catch (const std::invalid_argument& e) {
    throw io::FormatError(fmt::format("frame: {}", e.what()));
  }
}

}  // namespace tma
