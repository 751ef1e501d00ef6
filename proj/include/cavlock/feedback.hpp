#pragma once

#include <complex>
#include <functional>
#include <string>

#include "cavlock/linear_response.hpp"
#include "cavlock/meanfield.hpp"

namespace cavlock {

enum class Regime { Ideal, StrongField, DarkPoint, General };

const char* to_string(Regime r);

/// Post-feedback linewidth summary. two_pi_delta_f is S_Delta(0) in rad/s;
/// delta_f is the same quantity in Hz.
struct LinewidthReport {
  double delta_f = 0.0;
  double two_pi_delta_f = 0.0;
  double omega_S = 0.0;
  double omega_R = 0.0;
  Regime regime = Regime::General;
  double linear_range = 0.0;
  // Regime closed forms (2 pi delta_f); NaN when the regime does not apply.
  double strong_field_form = 0.0;
  double dark_point_form = 0.0;
  bool corners_resolved = true;
};

struct Corners {
  double omega_S = 0.0;
  double omega_R = 0.0;
  bool resolved = true;
  // Bad-cavity closed forms for the tagged regimes; NaN otherwise.
  double omega_S_asym = 0.0;
  double omega_R_asym = 0.0;
};

/// Proportional-integral servo beta = K (1 + corner / s), s the Laplace
/// variable (s = -i w in the Fourier convention used for R).
struct LoopFilter {
  double gain = 0.0;
  double corner = 0.0;
  double ugf = 0.0;

  cplx laplace(cplx s) const { return gain * (1.0 + corner / s); }
  cplx at(double omega) const { return laplace(cplx(0.0, -omega)); }
};

/// Large-gain residual frequency noise S_Delta(w) (rad^2/s^2 per rad/s).
double residual_noise_spectrum(const SystemParams& p, const DerivedParams& d,
                               const MeanFieldState& s, double omega);

/// 2 pi delta_f from the z-parameterized closed form.
double linewidth_from_inversion(const SystemParams& p, const DerivedParams& d, double z);
/// 2 pi delta_f at the dark point; NaN when NC_eff <= 1.
double dark_point_linewidth(const SystemParams& p, const DerivedParams& d);
/// 2 pi delta_f in the strong-drive limit.
double strong_field_linewidth(const SystemParams& p, const DerivedParams& d);

Regime classify_regime(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s);

LinewidthReport effective_linewidth(const SystemParams& p, const DerivedParams& d,
                                    const MeanFieldState& s);

Corners corner_frequencies(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s);

/// Plant R as a function of the Laplace variable.
cplx plant_laplace(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s, cplx sv);

LoopFilter design_loop_filter(const SystemParams& p, const DerivedParams& d,
                              const MeanFieldState& s, double ugf);

/// Closed-loop poles in the right half plane, counted by the winding of
/// 1 + R beta along an indented Nyquist contour.
int closed_loop_rhp_poles(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s,
                          const LoopFilter& filter);

struct LoopMargins {
  double crossover = 0.0;
  double phase_margin_deg = 0.0;
};

LoopMargins loop_margins(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s,
                         const LoopFilter& filter);

/// Finite-gain spectrum of the corrected detuning. bare_psd(w) is the PSD
/// of the free-running detuning. Throws Error{UnstableLoop} if the loop is
/// unstable.
double closed_loop_spectrum(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s,
                            const LoopFilter& filter, const std::function<double(double)>& bare_psd,
                            double omega);

}  // namespace cavlock
