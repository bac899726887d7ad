#include "tma/sim/recording.hpp"

#include <fstream>
#include <system_error>

#include <fmt/format.h>

#include "tma/io/pgm.hpp"

namespace tma::sim {

namespace fs = std::filesystem;
using nlohmann::json;

std::string frame_file_stem(std::uint64_t seq) { return fmt::format("{:04d}", seq); }

RecordingWriter::RecordingWriter(fs::path dir, const ScenarioConfig& config) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) {
    throw std::runtime_error(fmt::format("cannot create recording directory '{}'", dir_.string()));
  }
  const fs::path probe = dir_ / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) {
      throw std::runtime_error(fmt::format("recording directory '{}' is not writable", dir_.string()));
    }
  }
  fs::remove(probe, ec);
  manifest_ = json{{"format", kRecordingFormat},
                   {"config", to_json(config)},
                   {"depth_unit_m", config.depth_unit_m},
                   {"width", config.camera.width},
                   {"height", config.camera.height},
                   {"frames", json::array()}};
}

void RecordingWriter::add(const FrameBundle& frame, const GroundTruth& truth) {
  if (finished_) throw std::logic_error("recording already finished");
  validate_frame(frame);
  const std::string stem = frame_file_stem(frame.seq);
  const std::string mask_name = stem + "_mask.pgm";
  const std::string depth_name = stem + "_depth.pgm";
  io::write_file_atomic(dir_ / mask_name, io::encode_mask_pgm(frame.lane_mask));
  io::write_file_atomic(dir_ / depth_name, io::encode_depth_pgm(frame.depth, frame.depth_unit_m));
  json entry{{"seq", frame.seq},
             {"timestamp_ns", frame.timestamp_ns},
             {"mask", mask_name},
             {"depth", depth_name},
             {"detections", json::array()},
             {"truth", to_json(truth)}};
  for (const auto& d : frame.detections) entry["detections"].push_back(to_json(d));
  manifest_["frames"].push_back(std::move(entry));
}

void RecordingWriter::finish() {
  if (finished_) return;
  io::write_file_atomic(dir_ / kManifestName, manifest_.dump(2) + "\n");
  finished_ = true;
}

RecordingReader::RecordingReader(fs::path dir) : dir_(std::move(dir)) {
  const fs::path manifest_path = dir_ / kManifestName;
  if (!fs::exists(manifest_path)) {
    throw io::FormatError(fmt::format("no manifest in '{}'", dir_.string()));
  }
  const auto bytes = io::read_file(manifest_path);
  json manifest;
  try {
    manifest = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw io::FormatError(fmt::format("manifest: parse error ({})", e.what()));
  }
  try {
    if (manifest.at("format").get<std::string>() != kRecordingFormat) {
      throw io::FormatError("manifest: unsupported format tag");
    }
    config_ = manifest.at("config");
    depth_unit_m_ = manifest.at("depth_unit_m").get<double>();
    width_ = manifest.at("width").get<int>();
    height_ = manifest.at("height").get<int>();
    for (const auto& f : manifest.at("frames")) {
      RecordedFrameInfo info;
      info.seq = f.at("seq").get<std::uint64_t>();
      info.timestamp_ns = f.at("timestamp_ns").get<std::uint64_t>();
      info.mask_file = f.at("mask").get<std::string>();
      info.depth_file = f.at("depth").get<std::string>();
      for (const auto& d : f.at("detections")) info.detections.push_back(detection_from_json(d));
      if (f.contains("truth") && !f.at("truth").is_null()) info.truth = truth_from_json(f.at("truth"));
      frames_.push_back(std::move(info));
    }
  } catch (const json::exception& e) {
    throw io::FormatError(fmt::format("manifest: bad field ({})", e.what()));
  } catch (const std::invalid_argument& e) {
    throw io::FormatError(fmt::format("manifest: {}", e.what()));
  }
}

ScenarioConfig RecordingReader::scenario() const { return scenario_from_json(config_); }

SimFrame RecordingReader::load(std::size_t i) const {
  const auto& info = frames_.at(i);
  auto read_named = [&](const std::string& name) {
    try {
      return io::read_file(dir_ / name);
    } catch (const std::exception&) {
      throw std::runtime_error(fmt::format("frame {}: cannot read '{}'", info.seq, name));
    }
  };
  SimFrame out;
  auto& f = out.bundle;
  f.seq = info.seq;
  f.timestamp_ns = info.timestamp_ns;
  f.depth_unit_m = depth_unit_m_;
  try {
    f.lane_mask = io::decode_mask_pgm(read_named(info.mask_file));
    f.depth = io::decode_depth_pgm(read_named(info.depth_file), depth_unit_m_);
  } catch (const io::FormatError& e) {
    throw io::FormatError(fmt::format("frame {}: {}", info.seq, e.what()));
  }
  if (f.lane_mask.width() != width_ || f.lane_mask.height() != height_ ||
      f.depth.width() != width_ || f.depth.height() != height_) {
    throw io::FormatError(fmt::format("frame {}: image size does not match manifest {}x{}", info.seq,
                                      width_, height_));
  }
  f.detections = info.detections;
  validate_frame(f);
  if (info.truth) out.truth = *info.truth;
  return out;
}

}  // namespace tma::sim
