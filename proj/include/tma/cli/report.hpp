#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tma/pipeline/nodes.hpp"
#include "tma/pipeline/processor.hpp"
#include "tma/sim/scenario.hpp"

namespace tma::cli {

struct RunRow {
  std::uint64_t seq = 0;
  double t_s = 0.0;
  geometry::LaneAssignment lane = geometry::LaneAssignment::kUnknown;
  std::optional<geometry::LaneAssignment> lane_truth;
  std::optional<double> distance_est_m;
  std::optional<double> distance_truth_m;
  std::optional<double> speed_est_mps;
  std::optional<double> speed_truth_mps;
  bool warn = false;

  bool operator==(const RunRow&) const = default;
};

struct RunSummary {
  std::size_t frames = 0;
  /// Frames with both a speed estimate and a true speed.
  std::size_t scored_frames = 0;
  std::optional<double> mean_speed_mps;
  std::optional<double> speed_mse;
  std::size_t warn_frames = 0;
  std::optional<std::uint64_t> first_warn_seq;
  /// First frame whose true distance is inside the mode's threshold while
  /// the target is truly in the follower's lane.
  std::optional<std::uint64_t> truth_crossing_seq;

  bool operator==(const RunSummary&) const = default;
};

struct RunReport {
  std::vector<RunRow> rows;
  RunSummary summary;
  nlohmann::json config;  // scenario + pipeline echo
};

inline constexpr const char* kRunCsvHeader =
    "seq,t_s,lane,lane_truth,distance_est_m,distance_truth_m,speed_est_mps,speed_truth_mps,warn";
inline constexpr const char* kLedCsvHeader = "seq,timestamp_ns,on";
inline constexpr const char* kSweepCsvHeader = "set_speed_mps,pooled_mean_mps,mse,runs,seed";
inline constexpr const char* kSweepRunsCsvHeader = "set_speed_mps,run,seed,mean_speed_mps,mse,scored_frames";

std::vector<RunRow> rows_from_outcomes(const std::vector<pipeline::FrameOutcome>& outcomes);
RunSummary summarize(const std::vector<RunRow>& rows, const pipeline::PipelineConfig& config);
RunReport make_run_report(const std::vector<pipeline::FrameOutcome>& outcomes,
                          const sim::ScenarioConfig& scenario, const pipeline::PipelineConfig& config);

/// Shortest text that reads back to the same double.
std::string format_double(double v);
std::string run_csv(const std::vector<RunRow>& rows);
/// Parses run_csv output (used to recompute summaries from files).
std::vector<RunRow> parse_run_csv(const std::string& text);
nlohmann::json to_json(const RunSummary& summary);
std::string run_json(const RunReport& report);
std::string led_csv(const std::vector<pipeline::LedEvent>& events);

/// Writes report.json and report.csv into `dir` (created if missing).
void write_run_report(const std::filesystem::path& dir, const RunReport& report);

struct SweepRun {
  double set_speed_mps = 0.0;
  int run = 0;
  std::uint64_t seed = 0;
  RunSummary summary;
};

struct SweepRow {
  double set_speed_mps = 0.0;
  std::vector<double> run_means;
  std::optional<double> pooled_mean_mps;
  std::optional<double> mse;
  int runs = 0;
  std::uint64_t seed = 0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  std::vector<SweepRun> runs;
};

/// runs x speeds in-process scenarios; run r of every speed uses seed + r.
/// Pooled mean and MSE are taken over all scored frames of the speed's runs.
SweepReport run_sweep(const sim::ScenarioConfig& base, const pipeline::PipelineConfig& config,
                      const std::vector<double>& speeds_mps, int runs, std::uint64_t seed);

std::string sweep_csv(const SweepReport& report);
std::string sweep_runs_csv(const SweepReport& report);
nlohmann::json to_json(const SweepReport& report);
void write_sweep_report(const std::filesystem::path& dir, const SweepReport& report);

}  // namespace tma::cli
