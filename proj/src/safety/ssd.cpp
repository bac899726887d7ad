#include "tma/safety/ssd.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

namespace tma::safety {
namespace {

constexpr std::array<DesignSsdRow, 14> kDesignTable{{
    {15, 80},   {20, 115},  {25, 155},  {30, 200},  {35, 250},  {40, 305},  {45, 360},
    {50, 425},  {55, 495},  {60, 570},  {65, 645},  {70, 730},  {75, 820},  {80, 910},
}};

}  // namespace

double compute_ssd_ft(double speed_mph, const SsdParams& params) {
  if (!std::isfinite(speed_mph) || speed_mph < 0.0) {
    throw std::invalid_argument(fmt::format("speed must be finite and >= 0 (got {})", speed_mph));
  }
  if (!(params.reaction_time_s > 0.0) || !(params.decel_ftps2 > 0.0)) {
    throw std::invalid_argument("reaction time and deceleration must be positive");
  }
  return 1.47 * speed_mph * params.reaction_time_s +
         1.075 * speed_mph * speed_mph / params.decel_ftps2;
}

std::span<const DesignSsdRow> design_ssd_table() { return kDesignTable; }

double design_ssd_ft(double design_speed_mph, double tolerance_mph) {
  if (!std::isfinite(design_speed_mph) || design_speed_mph <= 0.0) {
    throw std::invalid_argument(
        fmt::format("design speed must be > 0 mph (got {})", design_speed_mph));
  }
  for (const auto& row : kDesignTable) {
    if (design_speed_mph <= row.speed_mph + tolerance_mph) return row.ssd_ft;
  }
  throw OutOfTableError(
      fmt::format("design speed {} mph is above the {} mph table limit", design_speed_mph,
                  kDesignTable.back().speed_mph));
}

std::string_view to_string(WarningMode mode) {
  switch (mode) {
    case WarningMode::kSimProximity:
      return "sim_proximity";
    case WarningMode::kFieldContinuous:
      return "field_continuous";
    case WarningMode::kFieldTable:
      return "field_table";
  }
  return "sim_proximity";
}

WarningMode parse_mode(std::string_view name) {
  if (name == "sim" || name == "sim_proximity") return WarningMode::kSimProximity;
  if (name == "field_continuous") return WarningMode::kFieldContinuous;
  if (name == "field_table") return WarningMode::kFieldTable;
  throw std::invalid_argument(fmt::format("unknown warning mode '{}'", name));
}

double warning_threshold_m(double closing_speed_mps, WarningMode mode,
                           const WarningConfig& config) {
  switch (mode) {
    case WarningMode::kSimProximity:
      return config.sim_threshold_m;
    case WarningMode::kFieldContinuous:
    case WarningMode::kFieldTable: {
      if (!(closing_speed_mps > 0.0)) return 0.0;
      const double mph = mps_to_mph(closing_speed_mps);
      if (mode == WarningMode::kFieldTable) {
        try {
          return ft_to_m(design_ssd_ft(mph, config.table_tolerance_mph));
        } catch (const OutOfTableError&) {
          // above the table: fall through to the formula
        }
      }
      return ft_to_m(compute_ssd_ft(mph, config.ssd));
    }
  }
  throw std::invalid_argument("unknown warning mode");
}

WarningDecision should_warn(double distance_m, double speed_mps, WarningMode mode,
                            const WarningConfig& config) {
  if (!std::isfinite(distance_m) || distance_m <= 0.0) {
    throw std::invalid_argument(fmt::format("distance must be finite and > 0 (got {})", distance_m));
  }
  if (!std::isfinite(speed_mps)) throw std::invalid_argument("speed must be finite");

  WarningDecision d;
  d.mode = mode;
  d.distance_m = distance_m;
  d.closing_speed_mps = std::max(0.0, -speed_mps);
  d.threshold_m = warning_threshold_m(d.closing_speed_mps, mode, config);

  if (mode == WarningMode::kSimProximity) {
    d.warn = distance_m < d.threshold_m;
    d.reason = d.warn ? "within proximity threshold" : "beyond proximity threshold";
    return d;
  }
  if (!(d.closing_speed_mps > 0.0)) {
    d.warn = false;
    d.reason = "not closing";
    return d;
  }
  const bool above_table = mode == WarningMode::kFieldTable &&
                           mps_to_mph(d.closing_speed_mps) >
                               design_ssd_table().back().speed_mph + config.table_tolerance_mph;
  d.warn = distance_m < d.threshold_m;
  d.reason = fmt::format("{} stopping sight distance{}", d.warn ? "inside" : "outside",
                         above_table ? " (formula, above table)" : "");
  return d;
}

}  // namespace tma::safety
