#pragma once

#include <numbers>
#include <string>
#include <vector>

namespace cavlock {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Physical rates of the driven atom-cavity system. All rates are angular
/// (rad/s); alpha_in_sq is a photon flux (photons/s).
struct SystemParams {
  double g = 0.0;
  double kappa = 0.0;
  double gamma = 0.0;
  double gamma_d = 0.0;
  double gamma_p = 0.0;
  double n_atoms = 1.0;
  double alpha_in_sq = 0.0;
};

/// Scales derived from SystemParams. When Gamma == 0 (no single-particle
/// decoherence) the system is in ideal mode: C_eff and NC_eff are +inf and I0
/// is undefined (NaN, i0_defined == false). C is +inf whenever gamma == 0.
struct DerivedParams {
  double Gamma = 0.0;
  double C = 0.0;
  double C_eff = 0.0;
  double NC_eff = 0.0;
  double alpha_in_c_sq = 0.0;
  double I0 = 0.0;
  double Cgamma = 0.0;  // 4 g^2 / kappa, finite even for gamma == 0
  bool i0_defined = false;

  bool ideal() const { return Gamma == 0.0; }
  // gamma + gamma_p: the rate that repopulates the ground state
  double gamma_rad = 0.0;
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }
  bool empty() const { return errors.empty() && warnings.empty(); }
};

ValidationReport validate(const SystemParams& params);

/// Throws Error{InvalidParams} when validate() reports a hard error.
DerivedParams derive(const SystemParams& params);

// Ratio thresholds used for the bad-cavity and strong-saturation notices.
inline constexpr double kBadCavityMargin = 0.1;
inline constexpr double kStrongFieldRatio = 10.0;

}  // namespace cavlock
