#pragma once

#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "cavlock/error.hpp"
#include "cavlock/params.hpp"

namespace cavlock {

using cplx = std::complex<double>;

enum class Stability { Stable, Unstable, Marginal };

const char* to_string(Stability s);

/// Undriven-decoherence steady state below the drive threshold.
struct IdealState {
  double theta = 0.0;
  cplx J;      // collective dipole <S^->
  double Z = 0.0;
  cplx alpha;  // intracavity amplitude (identically zero)
  double alpha_out = 0.0;
};

/// One mean-field steady-state branch. J is the collective dipole <S^->, so
/// iJ is real; alpha is real. For ideal-mode states theta is the Bloch angle
/// and z = -cos(theta)/2.
struct MeanFieldState {
  double z = -0.5;
  cplx alpha;
  cplx J;
  double alpha_out = 0.0;
  Stability stability = Stability::Stable;
  int branch_id = 0;
  bool ideal = false;
  double theta = 0.0;

  double iJ() const { return -J.imag(); }
};

/// Bistable range of 2 alpha_in^2 / I0; lower == upper at NC_eff == 8.
struct BistabilityWindow {
  double lower = 0.0;
  double upper = 0.0;
  bool exists = false;
};

struct DarkPoint {
  double z = 0.0;
  double alpha_in_sq = 0.0;
};

/// Carries the last detuning at which continuation still held the branch.
class NoConvergenceError : public Error {
 public:
  NoConvergenceError(const std::string& what, double last_good_delta)
      : Error(ErrorCode::NoConvergence, what), last_good_delta_(last_good_delta) {}
  double last_good_delta() const { return last_good_delta_; }

 private:
  double last_good_delta_;
};

IdealState ideal_steady_state(const SystemParams& p, const DerivedParams& d);
MeanFieldState to_state(const SystemParams& p, const DerivedParams& d, const IdealState& s);

/// Physical roots z of the inversion cubic for a given NC_eff and drive
/// alpha_in^2 / I0, sorted ascending. One or three roots in [-1/2, 0).
std::vector<double> solve_inversion_cubic(double nc_eff, double drive_over_i0);
std::vector<double> solve_inversion_cubic(const SystemParams& p, const DerivedParams& d);

/// Scaled residual of the inversion cubic at z.
double cubic_residual(double nc_eff, double drive_over_i0, double z);

/// Drive alpha_in^2 / I0 that makes z a steady state.
double drive_for_inversion(double nc_eff, double z);

MeanFieldState branch_state(const SystemParams& p, const DerivedParams& d, double z,
                            int branch_id = 0);

/// Linearized drift of the mean-field equations at a non-ideal steady state,
/// in the variable order (Re a, Im a, Re J, Im J, Z).
Eigen::Matrix<double, 5, 5> linearized_drift(const SystemParams& p, const DerivedParams& d,
                                              double z);

Stability classify_stability(const SystemParams& p, const DerivedParams& d, double z);

/// Every steady state for the current drive (ideal or non-ideal mode).
std::vector<MeanFieldState> steady_states(const SystemParams& p, const DerivedParams& d);

BistabilityWindow bistability_window(double nc_eff);
inline BistabilityWindow bistability_window(const DerivedParams& d) {
  return bistability_window(d.NC_eff);
}

/// Saddle-node locations in 2 alpha_in^2 / I0, found as the numerical
/// extrema of the drive along the inversion rather than from the closed-form
/// window.
std::vector<double> fold_points(double nc_eff);

std::optional<DarkPoint> dark_point(const DerivedParams& d);

/// Mean Y quadrature of the output light for a constant atom-drive detuning
/// delta0, following `branch` from delta0 = 0 by pseudo-arclength continuation.
double static_detuning_response(const SystemParams& p, const DerivedParams& d, double delta0,
                                const MeanFieldState& branch);

struct DispersivePeak {
  double delta = 0.0;
  double y_out = 0.0;
};

/// Location of the maximum of the dispersive curve for delta0 > 0.
DispersivePeak dispersive_extremum(const SystemParams& p, const DerivedParams& d,
                                   const MeanFieldState& branch);

}  // namespace cavlock
