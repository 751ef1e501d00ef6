#include "cavlock/params.hpp"

#include <cmath>
#include <limits>

#include "cavlock/error.hpp"

namespace cavlock {

namespace {

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

ValidationReport validate(const SystemParams& p) {
  ValidationReport r;
  if (!(std::isfinite(p.kappa) && p.kappa > 0.0)) r.errors.emplace_back("kappa must be positive");
  if (!(std::isfinite(p.g) && p.g > 0.0)) r.errors.emplace_back("g must be positive");
  if (!finite_nonneg(p.gamma)) r.errors.emplace_back("gamma must be non-negative");
  if (!finite_nonneg(p.gamma_d)) r.errors.emplace_back("gamma_d must be non-negative");
  if (!finite_nonneg(p.gamma_p)) r.errors.emplace_back("gamma_p must be non-negative");
  if (!(std::isfinite(p.n_atoms) && p.n_atoms >= 1.0)) r.errors.emplace_back("n_atoms must be >= 1");
  if (!finite_nonneg(p.alpha_in_sq)) r.errors.emplace_back("alpha_in_sq must be non-negative");
  if (!r.errors.empty()) return r;

  const double Gamma = p.gamma + p.gamma_d + p.gamma_p;
  if (p.g * std::sqrt(p.n_atoms) > kBadCavityMargin * p.kappa ||
      Gamma > kBadCavityMargin * p.kappa) {
    r.warnings.emplace_back("bad-cavity approximation degraded");
  }
  if (Gamma > 0.0 && p.gamma + p.gamma_p == 0.0) {
    r.warnings.emplace_back("gamma + gamma_p = 0 with dephasing: input field scale I0 vanishes");
  }
  if (Gamma > 0.0 && p.gamma + p.gamma_p > 0.0) {
    const double I0 = (p.g * p.n_atoms) * (p.g * p.n_atoms) / (4.0 * p.kappa) *
                      (p.gamma + p.gamma_p) / Gamma;
    if (p.alpha_in_sq > kStrongFieldRatio * I0) {
      r.warnings.emplace_back("strong saturation: alpha_in_sq > 10 I0");
    }
  }
  return r;
}

DerivedParams derive(const SystemParams& p) {
  const auto report = validate(p);
  if (!report.ok()) throw Error(ErrorCode::InvalidParams, report.errors.front());

  constexpr double inf = std::numeric_limits<double>::infinity();
  DerivedParams d;
  d.Gamma = p.gamma + p.gamma_d + p.gamma_p;
  d.gamma_rad = p.gamma + p.gamma_p;
  d.Cgamma = 4.0 * p.g * p.g / p.kappa;
  d.C = p.gamma > 0.0 ? d.Cgamma / p.gamma : inf;
  d.C_eff = d.Gamma > 0.0 ? d.Cgamma / d.Gamma : inf;
  d.NC_eff = p.n_atoms * d.C_eff;
  const double gN = p.g * p.n_atoms;
  d.alpha_in_c_sq = gN * gN / (4.0 * p.kappa);
  d.i0_defined = d.Gamma > 0.0;
  d.I0 = d.i0_defined ? d.alpha_in_c_sq * d.gamma_rad / d.Gamma
                      : std::numeric_limits<double>::quiet_NaN();
  return d;
}

}  // namespace cavlock
