#include "tma/cli/config.hpp"

#include <fmt/format.h>

#include "tma/io/pgm.hpp"

namespace tma::cli {

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw sim::ConfigError("config", "must be a JSON object");
  nlohmann::json scenario_part = j;
  scenario_part.erase("pipeline");
  RunConfig c;
  c.scenario = sim::scenario_from_json(scenario_part);
  c.pipeline = pipeline::default_pipeline_config(c.scenario);
  if (j.contains("pipeline")) {
    c.pipeline = pipeline::pipeline_from_json(j.at("pipeline"), c.pipeline);
  }
  return c;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path) {
  if (!path) {
    RunConfig c;
    c.scenario = sim::lab_preset();
    c.pipeline = pipeline::default_pipeline_config(c.scenario);
    return c;
  }
  const auto bytes = io::read_file(*path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw sim::ConfigError("config", fmt::format("{}: {}", path->string(), e.what()));
  }
  return run_config_from_json(j);
}

nlohmann::json to_json(const RunConfig& config) {
  nlohmann::json j = sim::to_json(config.scenario);
  j["pipeline"] = pipeline::to_json(config.pipeline);
  return j;
}

}  // namespace tma::cli
