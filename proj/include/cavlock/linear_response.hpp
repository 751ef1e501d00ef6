#pragma once

#include <complex>
#include <vector>

#include "cavlock/meanfield.hpp"
#include "cavlock/params.hpp"

namespace cavlock {

// Frequencies follow the convention O(w) = \int e^{i w t} O(t) dt, so a time
// derivative maps to -i w and causal poles sit at i w = l.

/// Decay constants l_pm and zeros m_pm of the linearized Y sector. In ideal
/// mode l_pm = m_pm = lambda_pm. Asymptotic bad-cavity forms are filled when
/// g sqrt(N), Gamma << kappa.
struct DecayRates {
  cplx lp, lm;
  cplx mp, mm;
  cplx ideal_lp, ideal_lm;
  bool asymptotic = false;
  double lp_asym = 0.0;
  double lm_asym = 0.0;
  double mm_asym = 0.0;
};

struct NoiseGains {
  cplx input_y;
  cplx f_gamma;
  cplx f_gamma_p;
  cplx f_gamma_d;
};

struct FrequencyResponse {
  double omega = 0.0;
  cplx R;
  NoiseGains noise_gains;
};

/// Output Y-quadrature PSD in shot-noise units (vacuum = 1).
struct SpectrumSample {
  double omega = 0.0;
  double S_Yout = 0.0;
  bool unstable = false;  // set when evaluation was forced on an unstable branch

  /// Two-sided PSD of Y_out itself (the shot-noise level is 1/4).
  double raw() const { return 0.25 * S_Yout; }
};

struct EstimatorStats {
  double slope = 0.0;
  double variance = 0.0;
  double sensitivity_sq = 0.0;
  bool too_short = false;
};

DecayRates decay_rates(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s);

/// Signal transfer from detuning fluctuations to Y_out.
cplx response_R(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s,
                double omega);

FrequencyResponse frequency_response(const SystemParams& p, const DerivedParams& d,
                                     const MeanFieldState& s, double omega);

/// Throws Error{UnstableState} on an unstable branch unless force is set.
SpectrumSample spectrum_S_Yout(const SystemParams& p, const DerivedParams& d,
                               const MeanFieldState& s, double omega, bool force = false);

/// Zero-frequency output noise written directly in terms of z.
double spectrum_S_Yout_zero(double nc_eff, double z);

EstimatorStats estimator_stats(const SystemParams& p, const DerivedParams& d,
                               const MeanFieldState& s, double T);

std::vector<double> log_grid(double lo, double hi, std::size_t n);

/// Logarithmic grid over [1e-3 Re(l-), 1e3 kappa].
std::vector<double> default_grid(const SystemParams& p, const DerivedParams& d,
                                 const MeanFieldState& s, std::size_t n = 400);

}  // namespace cavlock
