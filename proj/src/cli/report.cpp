#include "tma/cli/report.hpp"

#include <sstream>

#include <fmt/format.h>

#include "tma/io/pgm.hpp"

namespace tma::cli {

std::vector<RunRow> rows_from_outcomes(const std::vector<pipeline::FrameOutcome>& outcomes) {
  std::vector<RunRow> rows;
  rows.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    RunRow row;
    row.seq = o.report.seq;
    row.t_s = static_cast<double>(o.report.timestamp_ns) / 1e9;
    row.lane = o.report.primary_lane();
    row.distance_est_m = o.report.distance_m;
    row.speed_est_mps = o.report.speed_mps;
    row.warn = o.report.warn;
    if (o.truth) {
      row.lane_truth = o.truth->lane;
      row.distance_truth_m = o.truth->distance_m;
      row.speed_truth_mps = o.truth->speed_mps;
    }
    rows.push_back(row);
  }
  return rows;
}

RunSummary summarize(const std::vector<RunRow>& rows, const pipeline::PipelineConfig& config) {
  RunSummary s;
  s.frames = rows.size();
  double sum = 0.0;
  double sq = 0.0;
  for (const auto& row : rows) {
    if (row.speed_est_mps && row.speed_truth_mps) {
      ++s.scored_frames;
      sum += *row.speed_est_mps;
      const double err = *row.speed_est_mps - *row.speed_truth_mps;
      sq += err * err;
    }
    if (row.warn) {
      ++s.warn_frames;
      if (!s.first_warn_seq) s.first_warn_seq = row.seq;
    }
    if (!s.truth_crossing_seq && row.distance_truth_m && row.speed_truth_mps &&
        row.lane_truth == config.follower_lane) {
      const double threshold =
          safety::warning_threshold_m(std::max(0.0, -*row.speed_truth_mps), config.mode, config.warning);
      if (*row.distance_truth_m < threshold) s.truth_crossing_seq = row.seq;
    }
  }
  if (s.scored_frames > 0) {
    s.mean_speed_mps = sum / static_cast<double>(s.scored_frames);
    s.speed_mse = sq / static_cast<double>(s.scored_frames);
  }
  return s;
}

RunReport make_run_report(const std::vector<pipeline::FrameOutcome>& outcomes,
                          const sim::ScenarioConfig& scenario, const pipeline::PipelineConfig& config) {
  RunReport r;
  r.rows = rows_from_outcomes(outcomes);
  r.summary = summarize(r.rows, config);
  r.config = {{"scenario", sim::to_json(scenario)}, {"pipeline", pipeline::to_json(config)}};
  return r;
}

std::string format_double(double v) { return fmt::format("{}", v); }

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

template <class T>
nlohmann::json opt_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::optional<double> parse_opt(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  return std::stod(cell);
}

}  // namespace

std::string run_csv(const std::vector<RunRow>& rows) {
  std::string out = std::string(kRunCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.seq, format_double(r.t_s), geometry::to_string(r.lane),
                       r.lane_truth ? std::string(geometry::to_string(*r.lane_truth)) : std::string(),
                       opt(r.distance_est_m), opt(r.distance_truth_m), opt(r.speed_est_mps),
                       opt(r.speed_truth_mps), r.warn ? 1 : 0);
  }
  return out;
}

std::vector<RunRow> parse_run_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kRunCsvHeader) throw io::FormatError("run CSV: bad header");
  std::vector<RunRow> rows;
  while (std::getline(in, line)) {
    const auto cells = split(line, ',');
    if (cells.size() != 9) throw io::FormatError(fmt::format("run CSV: bad row '{}'", line));
    RunRow r;
    r.seq = std::stoull(cells[0]);
    r.t_s = std::stod(cells[1]);
    r.lane = geometry::parse_lane(cells[2]);
    if (!cells[3].empty()) r.lane_truth = geometry::parse_lane(cells[3]);
    r.distance_est_m = parse_opt(cells[4]);
    r.distance_truth_m = parse_opt(cells[5]);
    r.speed_est_mps = parse_opt(cells[6]);
    r.speed_truth_mps = parse_opt(cells[7]);
    r.warn = cells[8] == "1";
    rows.push_back(r);
  }
  return rows;
}

nlohmann::json to_json(const RunSummary& s) {
  return {{"frames", s.frames},
          {"scored_frames", s.scored_frames},
          {"mean_speed_mps", opt_json(s.mean_speed_mps)},
          {"speed_mse", opt_json(s.speed_mse)},
          {"warn_frames", s.warn_frames},
          {"first_warn_seq", opt_json(s.first_warn_seq)},
          {"truth_crossing_seq", opt_json(s.truth_crossing_seq)}};
}

std::string run_json(const RunReport& report) {
  return nlohmann::json{{"summary", to_json(report.summary)}, {"config", report.config}}.dump(2) + "\n";
}

std::string led_csv(const std::vector<pipeline::LedEvent>& events) {
  std::string out = std::string(kLedCsvHeader) + "\n";
  for (const auto& e : events) out += fmt::format("{},{},{}\n", e.seq, e.timestamp_ns, e.on ? 1 : 0);
  return out;
}

void write_run_report(const std::filesystem::path& dir, const RunReport& report) {
  const std::string json = run_json(report);
  const std::string csv = run_csv(report.rows);
  std::filesystem::create_directories(dir);
  io::write_file_atomic(dir / "report.csv", csv);
  io::write_file_atomic(dir / "report.json", json);
}

SweepReport run_sweep(const sim::ScenarioConfig& base, const pipeline::PipelineConfig& config,
                      const std::vector<double>& speeds_mps, int runs, std::uint64_t seed) {
  if (speeds_mps.empty()) throw std::invalid_argument("sweep needs at least one speed");
  if (runs < 1) throw std::invalid_argument("sweep needs at least one run per speed");
  SweepReport report;
  for (const double speed : speeds_mps) {
    SweepRow row;
    row.set_speed_mps = speed;
    row.runs = runs;
    row.seed = seed;
    double sum = 0.0;
    double sq = 0.0;
    std::size_t n = 0;
    for (int r = 0; r < runs; ++r) {
      sim::ScenarioConfig scenario = base;
      scenario.relative_speed_mps = speed;
      scenario.seed = seed + static_cast<std::uint64_t>(r);
      sim::validate(scenario);
      const auto result =
          pipeline::run_in_process(std::make_unique<pipeline::SimFrameSource>(scenario), config);
      const auto rows = rows_from_outcomes(result.outcomes);
      const RunSummary summary = summarize(rows, config);
      for (const auto& frame_row : rows) {
        if (frame_row.speed_est_mps && frame_row.speed_truth_mps) {
          sum += *frame_row.speed_est_mps;
          const double err = *frame_row.speed_est_mps - *frame_row.speed_truth_mps;
          sq += err * err;
          ++n;
        }
      }
      if (summary.mean_speed_mps) row.run_means.push_back(*summary.mean_speed_mps);
      report.runs.push_back({speed, r, scenario.seed, summary});
    }
    if (n > 0) {
      row.pooled_mean_mps = sum / static_cast<double>(n);
      row.mse = sq / static_cast<double>(n);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string sweep_csv(const SweepReport& report) {
  std::string out = std::string(kSweepCsvHeader) + "\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{},{}\n", format_double(r.set_speed_mps), opt(r.pooled_mean_mps), opt(r.mse),
                       r.runs, r.seed);
  }
  return out;
}

std::string sweep_runs_csv(const SweepReport& report) {
  std::string out = std::string(kSweepRunsCsvHeader) + "\n";
  for (const auto& r : report.runs) {
    out += fmt::format("{},{},{},{},{},{}\n", format_double(r.set_speed_mps), r.run, r.seed,
                       opt(r.summary.mean_speed_mps), opt(r.summary.speed_mse), r.summary.scored_frames);
  }
  return out;
}

nlohmann::json to_json(const SweepReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"set_speed_mps", r.set_speed_mps},
                    {"run_means_mps", r.run_means},
                    {"pooled_mean_mps", opt_json(r.pooled_mean_mps)},
                    {"mse", opt_json(r.mse)},
                    {"runs", r.runs},
                    {"seed", r.seed}});
  }
  return {{"rows", rows}};
}

void write_sweep_report(const std::filesystem::path& dir, const SweepReport& report) {
  const std::string csv = sweep_csv(report);
  const std::string runs = sweep_runs_csv(report);
  const std::string json = to_json(report).dump(2) + "\n";
  std::filesystem::create_directories(dir);
  io::write_file_atomic(dir / "sweep.csv", csv);
  io::write_file_atomic(dir / "sweep_runs.csv", runs);
  io::write_file_atomic(dir / "sweep.json", json);
}

}  // namespace tma::cli
