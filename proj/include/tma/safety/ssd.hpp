#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tma::safety {

/// Brake reaction time and deceleration for the stopping-sight-distance formula.
struct SsdParams {
  double reaction_time_s = 2.5;
  double decel_ftps2 = 11.2;
};

/// Design speed tier and its tabulated stopping sight distance on level road.
struct DesignSsdRow {
  int speed_mph;
  int ssd_ft;
};

class OutOfTableError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// SSD = 1.47 V t + 1.075 V^2 / a, V in mph, result in feet.
/// Throws std::invalid_argument for negative/non-finite speed or bad params.
double compute_ssd_ft(double speed_mph, const SsdParams& params = {});

/// The 14 level-roadway rows, 15..80 mph in 5 mph steps.
std::span<const DesignSsdRow> design_ssd_table();

/// Designed SSD of the smallest tier >= speed. A speed within tolerance_mph
/// above a tier uses that tier. Throws OutOfTableError above the last tier and
/// std::invalid_argument for speed <= 0.
double design_ssd_ft(double design_speed_mph, double tolerance_mph = 0.0);

inline constexpr double kMetersPerSecondPerMph = 0.44704;
inline constexpr double kMetersPerFoot = 0.3048;

constexpr double mps_to_mph(double v) { return v / kMetersPerSecondPerMph; }
constexpr double mph_to_mps(double v) { return v * kMetersPerSecondPerMph; }
constexpr double m_to_ft(double d) { return d / kMetersPerFoot; }
constexpr double ft_to_m(double d) { return d * kMetersPerFoot; }

enum class WarningMode { kSimProximity, kFieldContinuous, kFieldTable };

std::string_view to_string(WarningMode mode);
/// Accepts sim|sim_proximity|field_continuous|field_table; throws std::invalid_argument.
WarningMode parse_mode(std::string_view name);

struct WarningConfig {
  double sim_threshold_m = 0.3;
  SsdParams ssd;
  double table_tolerance_mph = 0.05;
};

struct WarningDecision {
  bool warn = false;
  WarningMode mode = WarningMode::kSimProximity;
  double threshold_m = 0.0;
  double distance_m = 0.0;
  double closing_speed_mps = 0.0;
  std::string reason;

  bool operator==(const WarningDecision&) const = default;
};

/// Warn/no-warn for one range + speed pair. In field modes a warning needs a
/// positive closing speed; the SSD threshold is evaluated at that speed.
WarningDecision should_warn(double distance_m, double speed_mps, WarningMode mode,
                            const WarningConfig& config = {});

/// Distance threshold (meters) a mode applies at a given closing speed.
/// Returns 0 in field modes when closing speed is not positive.
double warning_threshold_m(double closing_speed_mps, WarningMode mode,
                           const WarningConfig& config = {});

}  // namespace tma::safety
