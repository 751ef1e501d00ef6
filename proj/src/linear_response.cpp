#include "cavlock/linear_response.hpp"

#include <cmath>
#include <tuple>
#include <utility>

namespace cavlock {

namespace {

constexpr cplx I{0.0, 1.0};

void require_radiating(const DerivedParams& d) {
  if (!d.ideal() && !(d.gamma_rad > 0.0)) {
    throw Error(ErrorCode::DegenerateScale, "gamma + gamma_p = 0 with Gamma > 0");
  }
}

// Roots b + root and b - root of x^2 - 2 b x + prod, with the smaller one
// taken from the product to avoid cancellation.
std::pair<cplx, cplx> stable_roots(double b, cplx root, double prod) {
  if (b >= 0.0) {
    const cplx plus = b + root;
    return {plus, plus == 0.0 ? cplx(b) : prod / plus};
  }
  const cplx minus = b - root;
  return {minus == 0.0 ? cplx(b) : prod / minus, minus};
}

cplx pole_product(const DecayRates& r, double omega) {
  return (I * omega - r.lp) * (I * omega - r.lm);
}

}  // namespace

DecayRates decay_rates(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s) {
  const double kap = p.kappa;
  const double G = d.Gamma;
  const double coupling = 2.0 * p.g * p.g * p.n_atoms * s.z;

  DecayRates r;
  const cplx root_l = std::sqrt(cplx(std::pow((kap - G) / 4.0, 2) + coupling));
  const cplx root_m = std::sqrt(cplx(std::pow((kap + G) / 4.0, 2) + coupling));
  std::tie(r.lp, r.lm) = stable_roots((kap + G) / 4.0, root_l, kap * G / 4.0 - coupling);
  std::tie(r.mp, r.mm) = stable_roots((kap - G) / 4.0, root_m, -kap * G / 4.0 - coupling);

  // lambda_pm for the same Bloch angle with decoherence removed.
  const double cos_theta = s.ideal ? std::cos(s.theta) : -2.0 * s.z;
  const cplx root_i = std::sqrt(cplx(kap * kap / 16.0 - p.g * p.g * p.n_atoms * cos_theta));
  std::tie(r.ideal_lp, r.ideal_lm) =
      stable_roots(kap / 4.0, root_i, p.g * p.g * p.n_atoms * cos_theta);

  r.asymptotic =
      p.g * std::sqrt(p.n_atoms) <= kBadCavityMargin * kap && G <= kBadCavityMargin * kap;
  if (r.asymptotic) {
    r.lp_asym = kap / 2.0;
    if (d.ideal()) {
      r.lm_asym = 2.0 * p.g * p.g * p.n_atoms * cos_theta / kap;
      r.mm_asym = r.lm_asym;
    } else {
      const double x = 2.0 * d.NC_eff * s.z;
      r.lm_asym = G * (1.0 - x) / 2.0;
      r.mm_asym = -G * (1.0 + x) / 2.0;
    }
  }
  return r;
}

cplx response_R(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s,
                double omega) {
  const DecayRates r = decay_rates(p, d, s);
  return p.g * std::sqrt(p.kappa) * s.iJ() / pole_product(r, omega);
}

FrequencyResponse frequency_response(const SystemParams& p, const DerivedParams& d,
                                     const MeanFieldState& s, double omega) {
  require_radiating(d);
  const DecayRates r = decay_rates(p, d, s);
  const cplx den = pole_product(r, omega);
  FrequencyResponse f;
  f.omega = omega;
  f.R = p.g * std::sqrt(p.kappa) * s.iJ() / den;
  f.noise_gains.input_y = (I * omega + r.mp) * (I * omega + r.mm) / den;
  const double pref = p.g * std::sqrt(p.kappa * p.n_atoms);
  f.noise_gains.f_gamma = pref * std::sqrt(p.gamma) / den;
  f.noise_gains.f_gamma_p = pref * std::sqrt(p.gamma_p) / den;
  f.noise_gains.f_gamma_d = pref * std::sqrt(p.gamma_d) / den;
  return f;
}

SpectrumSample spectrum_S_Yout(const SystemParams& p, const DerivedParams& d,
                               const MeanFieldState& s, double omega, bool force) {
  const bool unstable = s.stability == Stability::Unstable;
  if (unstable && !force) {
    throw Error(ErrorCode::UnstableState, "output spectrum is undefined on an unstable branch");
  }
  const FrequencyResponse f = frequency_response(p, d, s, omega);
  // Every channel carries the vacuum quadrature PSD, so the gains add in
  // shot-noise units.
  const auto& n = f.noise_gains;
  SpectrumSample out;
  out.omega = omega;
  out.S_Yout = std::norm(n.input_y) + std::norm(n.f_gamma) + std::norm(n.f_gamma_p) +
               std::norm(n.f_gamma_d);
  out.unstable = unstable;
  return out;
}

double spectrum_S_Yout_zero(double nc_eff, double z) {
  const double x = 2.0 * nc_eff * z;
  const double den = (1.0 - x) * (1.0 - x);
  return (1.0 + x) * (1.0 + x) / den + 4.0 * nc_eff / den;
}

EstimatorStats estimator_stats(const SystemParams& p, const DerivedParams& d,
                               const MeanFieldState& s, double T) {
  if (!(T > 0.0)) throw Error(ErrorCode::InvalidParams, "integration time must be positive");
  const double S0 = spectrum_S_Yout(p, d, s, 0.0).S_Yout;
  const double slope = std::abs(response_R(p, d, s, 0.0));
  EstimatorStats e;
  e.slope = slope;
  e.variance = S0 / (4.0 * T);
  e.sensitivity_sq = e.variance / (slope * slope);
  e.too_short = T < 10.0 / decay_rates(p, d, s).lm.real();
  return e;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return g;
}

std::vector<double> default_grid(const SystemParams& p, const DerivedParams& d,
                                 const MeanFieldState& s, std::size_t n) {
  const double lm = decay_rates(p, d, s).lm.real();
  return log_grid(1e-3 * lm, 1e3 * p.kappa, n);
}

}  // namespace cavlock
