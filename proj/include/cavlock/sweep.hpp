#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cavlock/config.hpp"
#include "cavlock/csv.hpp"
#include "cavlock/oracle.hpp"

namespace cavlock {

inline constexpr const char* kToolVersion = CAVLOCK_VERSION;

/// Base parameters plus optional overrides resolved against the derived
/// scales: NC_eff (sets g), alpha_in_sq_over_I0 and, in ideal mode, theta
/// (each sets alpha_in_sq).
struct PointConfig {
  SystemParams params;
  std::optional<double> nc_eff;
  std::optional<double> drive_ratio;
  std::optional<double> theta;
  double T = 1.0;  // estimator integration time (s)
};

SystemParams resolve(const PointConfig& pc);

struct BranchReport {
  MeanFieldState state;
  double S_Yout0 = 0.0;
  double S_Yout0_closed = 0.0;  // z-parameterized form (nan in ideal mode)
  double two_pi_delta_f = 0.0;  // closed form, also on unstable branches
  std::optional<LinewidthReport> linewidth;
  std::optional<EstimatorStats> estimator;
  std::string error;
};

struct PointReport {
  SystemParams params;
  DerivedParams derived;
  ValidationReport validation;
  BistabilityWindow window;
  std::optional<DarkPoint> dark;
  std::vector<BranchReport> branches;
  std::string error;      // set when no steady state could be produced
  bool hard_error = false;
};

PointReport run_point(const PointConfig& pc);
std::string point_report_json(const PointReport& r);

enum class Output { SteadyState, Spectrum, Linewidth, Corners, Validate };

struct Axis {
  std::string name;
  std::string scale = "lin";  // lin | log | values
  double min = 0.0;
  double max = 0.0;
  int n = 2;
  std::vector<double> values;

  std::vector<double> grid() const;
};

const std::vector<std::string>& axis_names();

struct SweepConfig {
  PointConfig base;
  Axis axis1;
  std::optional<Axis> axis2;
  std::vector<Output> outputs{Output::SteadyState};
  bool normalize_linewidth = false;
  bool folds = false;
  int threads = 0;  // 0: hardware concurrency
  std::uint64_t seed = 1;
  std::uint64_t config_hash = 0;

  bool wants(Output o) const;
};

/// Parses the physical and point keys; `units` (hz|rad) scales every rate.
PointConfig point_from_config(const Config& cfg);
SweepConfig sweep_from_config(const Config& cfg);
Axis parse_axis(const std::string& spec, double rate_scale);

/// Built-in configs reproducing the paper's figure data: fig2d, fig3a, fig3b.
Config preset_config(const std::string& name);
const std::vector<std::string>& preset_names();

/// Evaluates every grid point (in parallel) and returns rows in axis order:
/// axis2 outer, axis1 inner, one row per branch. Fold rows follow when
/// requested. Solver failures land in the `error` column.
CsvDataset run_sweep(const SweepConfig& sweep);

/// Rows whose error column marks a hard failure (not AboveThreshold or an
/// unstable-branch notice).
std::size_t count_hard_errors(const CsvDataset& data);

std::vector<std::string> standard_metadata(std::uint64_t config_hash);

}  // namespace cavlock
