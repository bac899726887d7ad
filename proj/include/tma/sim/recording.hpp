#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tma/pipeline/frame.hpp"
#include "tma/sim/scenario.hpp"

namespace tma::sim {

// Recording directory layout:
//   manifest        JSON: format tag, config echo, depth unit, image size and
//                   one entry per frame (seq, timestamp_ns, file names,
//                   detections, ground truth)
//   NNNN_mask.pgm   8-bit P5 lane mask
//   NNNN_depth.pgm  16-bit big-endian P5 depth in depth_unit_m counts, 0 = invalid

inline constexpr const char* kManifestName = "manifest";
inline constexpr const char* kRecordingFormat = "tma-recording/1";

std::string frame_file_stem(std::uint64_t seq);

class RecordingWriter {
 public:
  /// Creates the directory if needed and probes that it is writable, so a
  /// bad path fails before any frame is produced.
  RecordingWriter(std::filesystem::path dir, const ScenarioConfig& config);

  void add(const FrameBundle& frame, const GroundTruth& truth);
  /// Writes the manifest; frames added after this are an error.
  void finish();

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  nlohmann::json manifest_;
  bool finished_ = false;
};

struct RecordedFrameInfo {
  std::uint64_t seq = 0;
  std::uint64_t timestamp_ns = 0;
  std::string mask_file;
  std::string depth_file;
  std::vector<Detection> detections;
  std::optional<GroundTruth> truth;
};

/// Parses the manifest eagerly and loads frame images on demand. Errors are
/// io::FormatError (bad manifest, size mismatch) or std::runtime_error naming
/// the frame whose file is missing or unreadable.
class RecordingReader {
 public:
  explicit RecordingReader(std::filesystem::path dir);

  std::size_t size() const { return frames_.size(); }
  const RecordedFrameInfo& info(std::size_t i) const { return frames_.at(i); }
  const nlohmann::json& config_echo() const { return config_; }
  /// Scenario config echoed in the manifest.
  ScenarioConfig scenario() const;

  SimFrame load(std::size_t i) const;

 private:
  std::filesystem::path dir_;
  nlohmann::json config_;
  double depth_unit_m_ = 0.001;
  int width_ = 0;
  int height_ = 0;
  std::vector<RecordedFrameInfo> frames_;
};

}  // namespace tma::sim
