#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cavlock/feedback.hpp"

namespace cavlock {

/// Time-domain integration settings. Records are block averages over
/// record_stride steps of length dt.
struct SimConfig {
  double dt = 0.0;
  double duration = 0.0;
  std::uint64_t seed = 0;
  int n_trajectories = 1;
  std::size_t welch_segment = 0;  // record samples per PSD segment
  int record_stride = 1;

  double record_step() const { return dt * record_stride; }
};

/// Fluctuation records of one trajectory. sx, y, y_in and y_out are block
/// averages over each record interval, so y_out == y_in - sqrt(kappa) y
/// holds sample by sample. x and s_perp are instantaneous values at t.
struct TimeSeries {
  std::vector<double> t;
  std::vector<double> sx;
  std::vector<double> y;
  std::vector<double> x;
  std::vector<double> s_perp;
  std::vector<double> y_in;
  std::vector<double> y_out;
  double record_step = 0.0;
};

struct PsdEstimate {
  std::vector<double> omega;
  std::vector<double> psd;
  std::vector<double> stderr_;
  std::size_t n_segments = 0;
};

/// Throws Error{ConfigError} when the configuration cannot resolve the
/// dynamics of this state.
void check_sim_config(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s,
                      const SimConfig& sim);

/// A configuration with ~64 Welch segments that satisfies every invariant.
SimConfig suggest_sim_config(const SystemParams& p, const DerivedParams& d,
                             const MeanFieldState& s, std::uint64_t seed = 1);

/// One trajectory of the linearized fluctuations, driven by white noise of
/// PSD 1/4 per channel and propagated exactly over each record interval.
TimeSeries simulate_linearized(const SystemParams& p, const DerivedParams& d,
                               const MeanFieldState& s, const SimConfig& sim, int trajectory = 0);

/// Hann-windowed, 50%-overlap averaged two-sided periodogram, multiplied by
/// scale. Segments are pooled across all series. Throws Error{TooShort}
/// when fewer than two segments fit.
PsdEstimate welch(const std::vector<std::vector<double>>& series, double step,
                  std::size_t segment, double scale = 1.0);

/// Welch PSD of y_out in shot-noise units.
PsdEstimate welch_psd(const std::vector<TimeSeries>& series, const SimConfig& sim);
PsdEstimate welch_psd(const TimeSeries& series, const SimConfig& sim);

/// Analytic S_Yout as seen by a block-averaged record with step h.
double expected_block_psd(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s,
                          double omega, double h);

/// Exact mean of the Hann-windowed periodogram of a block-averaged record
/// (step h, segment L), including window leakage.
std::vector<double> expected_welch_psd(const SystemParams& p, const DerivedParams& d,
                                       const MeanFieldState& s, double h, std::size_t L);

struct ComparisonReport {
  std::vector<double> omega;
  std::vector<double> measured;
  std::vector<double> expected;
  std::vector<double> z_score;
  double max_abs_z = 0.0;
  double threshold = 0.0;
  double dof = 0.0;
  std::size_t n_segments = 0;
  double zero_bin_measured = 0.0;
  double zero_bin_expected = 0.0;
  double zero_bin_stderr = 0.0;
  double zero_bin_analytic = 0.0;
  bool passed = false;
};

/// Compares an estimate against expectations bin by bin. Bins exclude DC
/// and Nyquist; the family-wise level is that of a two-sided 3 sigma test.
ComparisonReport compare_psd(const PsdEstimate& est, const std::vector<double>& expected);

ComparisonReport validate_spectrum(const SystemParams& p, const DerivedParams& d,
                                   const MeanFieldState& s, const SimConfig& sim);

/// Settings for simulate_closed_loop: ~200 segments whose resolution puts
/// several bins below a tenth of the integrator corner.
SimConfig suggest_loop_sim_config(const SystemParams& p, const DerivedParams& d,
                                  const MeanFieldState& s, const LoopFilter& filter,
                                  std::uint64_t seed = 1);

/// Closed-loop servo simulation. bare_psd is the (white, two-sided) PSD of
/// the free-running detuning. Returns the Welch PSD of the residual
/// detuning in rad^2/s^2 per rad/s, the same units as S_Delta.
/// Throws Error{UnstableLoop} if the loop fails the Nyquist test (when
/// precheck is set) or if the state diverges.
PsdEstimate simulate_closed_loop(const SystemParams& p, const DerivedParams& d,
                                 const MeanFieldState& s, const LoopFilter& filter,
                                 double bare_psd, const SimConfig& sim, bool precheck = true);

/// Mean PSD over bins with 0 < omega <= omega_max and its standard error.
struct BandLevel {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t bins = 0;
};
BandLevel band_level(const PsdEstimate& est, double omega_max);

/// Raw trajectory dump: an 8-byte magic, a length-prefixed JSON header
/// (fields, dt, seed, samples) and float64 columns.
void write_trajectory(const std::string& path, const TimeSeries& ts, const SimConfig& sim);
TimeSeries read_trajectory(const std::string& path);

void write_psd_csv(const std::string& path, const PsdEstimate& est);

}  // namespace cavlock
