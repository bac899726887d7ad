#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "tma/pipeline/processor.hpp"
#include "tma/sim/scenario.hpp"

namespace tma::cli {

/// A run configuration file: scenario fields at the top level plus an
/// optional "pipeline" object.
struct RunConfig {
  sim::ScenarioConfig scenario;
  pipeline::PipelineConfig pipeline;
};

/// Pipeline defaults follow the scenario preset (see default_pipeline_config).
/// Throws sim::ConfigError naming the bad field.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Lab defaults when no path is given. Parse errors are reported as a
/// ConfigError on field "config".
RunConfig load_run_config(const std::optional<std::filesystem::path>& path);
nlohmann::json to_json(const RunConfig& config);

}  // namespace tma::cli
