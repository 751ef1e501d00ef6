#include "cavlock/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace cavlock {

const char* to_string(Regime r) {
  switch (r) {
    case Regime::Ideal: return "ideal";
    case Regime::StrongField: return "strong_field";
    case Regime::DarkPoint: return "dark_point";
    case Regime::General: return "general";
  }
  return "unknown";
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kDarkTol = 1e-9;

void require_stable(const MeanFieldState& s) {
  if (s.stability == Stability::Unstable) {
    throw Error(ErrorCode::UnstableState, "feedback analysis requires a stable branch");
  }
}

// First w above w_lo at which f(w) crosses level; f assumed to start below.
double find_crossing(const std::function<double(double)>& f, double level, double w_lo, double w_hi) {
  double a = w_lo, b = w_lo;
  while (f(b) < level) {
    a = b;
    b *= 1.05;
    if (b > w_hi) return kNaN;
  }
  for (int it = 0; it < 200 && b - a > 1e-14 * b; ++it) {
    const double m = std::sqrt(a * b);
    (f(m) < level ? a : b) = m;
  }
  return std::sqrt(a * b);
}

}  // namespace

double residual_noise_spectrum(const SystemParams& p, const DerivedParams& d,
                               const MeanFieldState& s, double omega) {
  require_stable(s);
  const double S = spectrum_S_Yout(p, d, s, omega).S_Yout;
  return S / (4.0 * std::norm(response_R(p, d, s, omega)));
}

double linewidth_from_inversion(const SystemParams& p, const DerivedParams& d, double z) {
  (void)p;
  const double nc = d.NC_eff;
  const double x = 2.0 * nc * z;
  const double bracket = ((1.0 + x) * (1.0 + x) + 4.0 * nc) / (2.0 * (nc + x) * (-x));
  return (d.Cgamma / 4.0) * (d.Gamma / d.gamma_rad) * bracket;
}

double dark_point_linewidth(const SystemParams& p, const DerivedParams& d) {
  (void)p;
  if (!(d.NC_eff > 1.0)) return kNaN;
  return (d.Cgamma / 2.0) * (d.Gamma / d.gamma_rad) * d.NC_eff / (d.NC_eff - 1.0);
}

double strong_field_linewidth(const SystemParams& p, const DerivedParams& d) {
  return (d.Cgamma / 4.0) * (d.Gamma / d.gamma_rad) * (p.alpha_in_sq / (4.0 * d.I0)) *
         (1.0 + 4.0 * d.NC_eff);
}

Regime classify_regime(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s) {
  if (d.ideal()) return Regime::Ideal;
  if (d.NC_eff > 1.0 && std::abs(s.z + 0.5 / d.NC_eff) < kDarkTol) return Regime::DarkPoint;
  if (p.alpha_in_sq > kStrongFieldRatio * d.I0) return Regime::StrongField;
  return Regime::General;
}

Corners corner_frequencies(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s) {
  require_stable(s);
  const DecayRates rates = decay_rates(p, d, s);
  const double w_lo = 1e-4 * std::abs(rates.lm);
  const double w_hi = 1e3 * p.kappa;

  const double s0 = residual_noise_spectrum(p, d, s, 0.0);
  const double r0 = std::norm(response_R(p, d, s, 0.0));

  Corners c;
  c.omega_S = find_crossing([&](double w) { return residual_noise_spectrum(p, d, s, w); },
                            2.0 * s0, w_lo, w_hi);
  c.omega_R = find_crossing([&](double w) { return -std::norm(response_R(p, d, s, w)); },
                            -0.5 * r0, w_lo, w_hi);
  // The extraction is only meaningful when the low corner sits well below
  // the cavity corner kappa/2.
  const double cavity = 0.5 * p.kappa;
  c.resolved = c.omega_S < 0.5 * cavity && c.omega_R < 0.5 * cavity;

  c.omega_S_asym = kNaN;
  c.omega_R_asym = kNaN;
  if (rates.asymptotic) {
    switch (classify_regime(p, d, s)) {
      case Regime::Ideal:
        c.omega_S_asym = c.omega_R_asym = p.n_atoms * d.Cgamma * std::cos(s.theta) / 2.0;
        break;
      case Regime::StrongField:
        c.omega_S_asym = d.Gamma * std::sqrt(d.NC_eff + 0.25);
        c.omega_R_asym = d.Gamma / 2.0;
        break;
      case Regime::DarkPoint:
        c.omega_S_asym = d.Gamma * std::sqrt(d.NC_eff);
        c.omega_R_asym = d.Gamma;
        break;
      case Regime::General: {
        // Same bad-cavity reduction at arbitrary z.
        c.omega_S_asym = std::sqrt(rates.mm_asym * rates.mm_asym + d.NC_eff * d.Gamma * d.Gamma);
        c.omega_R_asym = rates.lm_asym;
        break;
      }
    }
  }
  return c;
}

LinewidthReport effective_linewidth(const SystemParams& p, const DerivedParams& d,
                                    const MeanFieldState& s) {
  require_stable(s);
  LinewidthReport rep;
  rep.regime = classify_regime(p, d, s);
  if (rep.regime == Regime::Ideal) {
    const double cot = 1.0 / std::tan(s.theta);
    rep.two_pi_delta_f = d.Cgamma * cot * cot / 4.0;
  } else {
    rep.two_pi_delta_f = linewidth_from_inversion(p, d, s.z);
  }
  rep.delta_f = rep.two_pi_delta_f / kTwoPi;
  rep.strong_field_form = rep.regime == Regime::StrongField ? strong_field_linewidth(p, d) : kNaN;
  rep.dark_point_form = rep.regime == Regime::DarkPoint ? dark_point_linewidth(p, d) : kNaN;

  const Corners c = corner_frequencies(p, d, s);
  rep.omega_S = c.omega_S;
  rep.omega_R = c.omega_R;
  rep.corners_resolved = c.resolved;

  const double nc_gamma = p.n_atoms * d.Cgamma;
  switch (rep.regime) {
    case Regime::Ideal:
    case Regime::DarkPoint:
      rep.linear_range = nc_gamma;
      break;
    case Regime::StrongField:
      rep.linear_range = nc_gamma * std::sqrt(p.alpha_in_sq / (8.0 * d.I0));
      break;
    case Regime::General:
      try {
        rep.linear_range = dispersive_extremum(p, d, s).delta;
      } catch (const Error&) {
        rep.linear_range = kNaN;
      }
      break;
  }
  return rep;
}

cplx plant_laplace(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s, cplx sv) {
  const DecayRates r = decay_rates(p, d, s);
  return p.g * std::sqrt(p.kappa) * s.iJ() / ((sv + r.lp) * (sv + r.lm));
}

LoopFilter design_loop_filter(const SystemParams& p, const DerivedParams& d,
                              const MeanFieldState& s, double ugf) {
  require_stable(s);
  const DecayRates r = decay_rates(p, d, s);
  if (!(ugf > 0.0) || !(ugf < 0.5 * r.lp.real()) || !(ugf < 0.25 * p.kappa)) {
    throw Error(ErrorCode::InfeasibleUGF,
                "unity-gain frequency must satisfy 0 < ugf < min(Re l+ / 2, kappa / 4)");
  }
  LoopFilter f;
  f.ugf = ugf;
  f.corner = ugf / 10.0;
  const cplx s_ugf(0.0, ugf);
  const cplx shape = 1.0 + f.corner / s_ugf;
  const double r0 = plant_laplace(p, d, s, 0.0).real();
  f.gain = (r0 >= 0.0 ? 1.0 : -1.0) / std::abs(plant_laplace(p, d, s, s_ugf) * shape);
  return f;
}

int closed_loop_rhp_poles(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s,
                          const LoopFilter& filter) {
  const DecayRates r = decay_rates(p, d, s);
  const auto one_plus_L = [&](cplx sv) {
    return 1.0 + plant_laplace(p, d, s, sv) * filter.laplace(sv);
  };

  // Contour: up the imaginary axis with a small right-hand indentation
  // around the integrator pole, closed at infinity where L -> 0.
  const double scale = std::max({std::abs(r.lp), std::abs(r.lm), std::abs(filter.corner),
                                 std::abs(filter.ugf), 1e-300});
  const double eps = 1e-9 * scale;
  const double big = 1e9 * scale;
  std::vector<cplx> path;
  const auto positive = log_grid(eps, big, 6000);
  for (auto it = positive.rbegin(); it != positive.rend(); ++it) path.emplace_back(0.0, -*it);
  for (int i = 1; i < 400; ++i) {
    const double phi = -0.5 * std::numbers::pi + std::numbers::pi * i / 400.0;
    path.push_back(eps * std::exp(cplx(0.0, phi)));
  }
  for (double w : positive) path.emplace_back(0.0, w);

  double total = 0.0;
  cplx prev = one_plus_L(path.front());
  for (std::size_t i = 1; i < path.size(); ++i) {
    const cplx cur = one_plus_L(path[i]);
    total += std::arg(cur / prev);
    prev = cur;
  }
  const double winding = total / (2.0 * std::numbers::pi);
  // The contour runs clockwise around the right half plane, which holds no
  // open-loop poles.
  return static_cast<int>(std::lround(-winding));
}

LoopMargins loop_margins(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s,
                         const LoopFilter& filter) {
  const auto mag = [&](double w) {
    const cplx sv(0.0, w);
    return std::abs(plant_laplace(p, d, s, sv) * filter.laplace(sv));
  };
  double lo = 1e-6 * filter.ugf, hi = 1e6 * filter.ugf;
  for (int it = 0; it < 300; ++it) {
    const double m = std::sqrt(lo * hi);
    (mag(m) > 1.0 ? lo : hi) = m;
  }
  LoopMargins lm;
  lm.crossover = std::sqrt(lo * hi);
  const cplx sv(0.0, lm.crossover);
  const double phase = std::arg(plant_laplace(p, d, s, sv) * filter.laplace(sv));
  lm.phase_margin_deg = 180.0 + phase * 180.0 / std::numbers::pi;
  if (lm.phase_margin_deg > 180.0) lm.phase_margin_deg -= 360.0;
  return lm;
}

double closed_loop_spectrum(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s,
                            const LoopFilter& filter, const std::function<double(double)>& bare_psd,
                            double omega) {
  require_stable(s);
  if (closed_loop_rhp_poles(p, d, s, filter) != 0) {
    throw Error(ErrorCode::UnstableLoop, "1 + R beta has right-half-plane zeros");
  }
  const cplx R = response_R(p, d, s, omega);
  const cplx beta = filter.at(omega);
  const double S_N = 0.25 * spectrum_S_Yout(p, d, s, omega).S_Yout;
  const double den = std::norm(1.0 + R * beta);
  return (bare_psd(omega) + std::norm(beta) * S_N) / den;
}

}  // namespace cavlock
