#include "cavlock/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Eigenvalues>

namespace cavlock {

const char* to_string(Stability s) {
  switch (s) {
    case Stability::Stable: return "stable";
    case Stability::Unstable: return "unstable";
    case Stability::Marginal: return "marginal";
  }
  return "unknown";
}

namespace {

constexpr double kMarginalTol = 1e-9;
constexpr double kImagTol = 1e-7;

void require_ideal(const DerivedParams& d) {
  if (!d.ideal()) {
    throw Error(ErrorCode::InvalidParams, "ideal-mode operation requires gamma = gamma_d = gamma_p = 0");
  }
}

void require_nonideal(const DerivedParams& d) {
  if (d.ideal()) {
    throw Error(ErrorCode::InvalidParams, "operation requires single-particle decoherence (Gamma > 0)");
  }
  if (!(d.gamma_rad > 0.0)) {
    throw Error(ErrorCode::DegenerateScale,
                "gamma + gamma_p = 0 with Gamma > 0: the dipole cannot radiate (I0 = 0)");
  }
}

// Monic cubic (z + 1/2)(z - a)^2 + c z with a = 1/(2 NC_eff), c = drive / 8.
struct InversionCubic {
  double b, c1, c0;

  InversionCubic(double nc_eff, double drive) {
    const double a = 0.5 / nc_eff;
    const double c = drive / 8.0;
    b = 0.5 - 2.0 * a;
    c1 = a * a - a + c;
    c0 = 0.5 * a * a;
  }

  double operator()(double z) const { return ((z + b) * z + c1) * z + c0; }
  double derivative(double z) const { return (3.0 * z + 2.0 * b) * z + c1; }
  double scale(double z) const {
    return std::abs(z * z * z) + std::abs(b * z * z) + std::abs(c1 * z) + std::abs(c0);
  }
};

double polish(const InversionCubic& p, double z) {
  for (int it = 0; it < 60; ++it) {
    const double f = p(z);
    const double df = p.derivative(z);
    if (df == 0.0) break;
    const double step = f / df;
    z -= step;
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(z))) break;
  }
  return z;
}

}  // namespace

IdealState ideal_steady_state(const SystemParams& p, const DerivedParams& d) {
  require_ideal(d);
  const double ratio = std::sqrt(p.alpha_in_sq / d.alpha_in_c_sq);
  if (ratio > 1.0) {
    throw Error(ErrorCode::AboveThreshold,
                "no stable steady state above alpha_in^c (persistent oscillations)");
  }
  IdealState s;
  s.theta = std::asin(ratio);
  s.J = cplx(0.0, -0.5 * p.n_atoms * std::sin(s.theta));
  s.Z = -0.5 * p.n_atoms * std::cos(s.theta);
  s.alpha = 0.0;
  s.alpha_out = std::sqrt(p.alpha_in_sq);
  return s;
}

MeanFieldState to_state(const SystemParams& p, const DerivedParams& d, const IdealState& s) {
  MeanFieldState m;
  m.ideal = true;
  m.theta = s.theta;
  m.z = s.Z / p.n_atoms;
  m.alpha = s.alpha;
  m.J = s.J;
  m.alpha_out = s.alpha_out;
  m.stability = classify_stability(p, d, m.z);
  return m;
}

std::vector<double> solve_inversion_cubic(double nc_eff, double drive) {
  if (!(nc_eff > 0.0) || !std::isfinite(nc_eff)) {
    throw Error(ErrorCode::InvalidParams, "NC_eff must be positive and finite");
  }
  if (!(drive >= 0.0)) throw Error(ErrorCode::InvalidParams, "drive must be non-negative");
  if (drive == 0.0) return {-0.5};

  const InversionCubic poly(nc_eff, drive);
  Eigen::Matrix3d companion = Eigen::Matrix3d::Zero();
  companion(0, 0) = -poly.b;
  companion(0, 1) = -poly.c1;
  companion(0, 2) = -poly.c0;
  companion(1, 0) = 1.0;
  companion(2, 1) = 1.0;
  Eigen::EigenSolver<Eigen::Matrix3d> es(companion, false);

  std::vector<double> roots;
  for (int i = 0; i < 3; ++i) {
    const cplx ev = es.eigenvalues()(i);
    if (std::abs(ev.imag()) > kImagTol * std::max(1.0, std::abs(ev))) continue;
    const double z = polish(poly, ev.real());
    // Physical window; the cubic has no real roots outside it for drive > 0.
    if (z < -0.5 || z >= 0.0) continue;
    roots.push_back(z);
  }
  std::sort(roots.begin(), roots.end());
  if (roots.empty()) {
    // Exactly one root is guaranteed in (-1/2, 0); fall back to bisection.
    double lo = -0.5, hi = 0.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (poly(mid) < 0.0 ? lo : hi) = mid;
    }
    roots.push_back(0.5 * (lo + hi));
  }
  return roots;
}

std::vector<double> solve_inversion_cubic(const SystemParams& p, const DerivedParams& d) {
  require_nonideal(d);
  return solve_inversion_cubic(d.NC_eff, p.alpha_in_sq / d.I0);
}

double cubic_residual(double nc_eff, double drive, double z) {
  const InversionCubic poly(nc_eff, drive);
  return std::abs(poly(z)) / poly.scale(z);
}

double drive_for_inversion(double nc_eff, double z) {
  const double a = 0.5 / nc_eff;
  return -8.0 * (z + 0.5) * (z - a) * (z - a) / z;
}

MeanFieldState branch_state(const SystemParams& p, const DerivedParams& d, double z,
                            int branch_id) {
  MeanFieldState m;
  m.z = z;
  m.branch_id = branch_id;
  const double alpha_in = std::sqrt(p.alpha_in_sq);
  if (d.ideal()) {
    m.ideal = true;
    m.theta = std::acos(std::clamp(-2.0 * z, -1.0, 1.0));
    m.alpha = 0.0;
    m.J = cplx(0.0, -0.5 * p.n_atoms * std::sin(m.theta));
    m.alpha_out = alpha_in;
  } else {
    const double x = 2.0 * d.NC_eff * z;
    const double a = 2.0 * alpha_in / (std::sqrt(p.kappa) * (1.0 - x));
    m.alpha = a;
    m.J = cplx(0.0, 4.0 * p.g * p.n_atoms * z * a / d.Gamma);
    m.alpha_out = alpha_in * (x + 1.0) / (x - 1.0);
  }
  m.stability = classify_stability(p, d, z);
  return m;
}

Eigen::Matrix<double, 5, 5> linearized_drift(const SystemParams& p, const DerivedParams& d,
                                              double z) {
  require_nonideal(d);
  const double N = p.n_atoms;
  const double g = p.g;
  const double x = 2.0 * d.NC_eff * z;
  const double ar = 2.0 * std::sqrt(p.alpha_in_sq) / (std::sqrt(p.kappa) * (1.0 - x));
  const double Ji = 4.0 * g * N * z * ar / d.Gamma;
  const double Z = N * z;

  Eigen::Matrix<double, 5, 5> A = Eigen::Matrix<double, 5, 5>::Zero();
  A(0, 0) = -0.5 * p.kappa;
  A(0, 3) = g;
  A(1, 1) = -0.5 * p.kappa;
  A(1, 2) = -g;
  A(2, 1) = -2.0 * g * Z;
  A(2, 2) = -0.5 * d.Gamma;
  A(3, 0) = 2.0 * g * Z;
  A(3, 3) = -0.5 * d.Gamma;
  A(3, 4) = 2.0 * g * ar;
  A(4, 0) = -2.0 * g * Ji;
  A(4, 3) = -2.0 * g * ar;
  A(4, 4) = -d.gamma_rad;
  return A;
}

Stability classify_stability(const SystemParams& p, const DerivedParams& d, double z) {
  if (d.ideal()) {
    // Both quadrature sectors share lambda_pm; the parallel spin direction is
    // conserved and does not enter.
    const double cos_theta = -2.0 * z;
    const cplx disc = std::sqrt(cplx(p.kappa * p.kappa / 16.0 - p.g * p.g * p.n_atoms * cos_theta));
    const double slowest = std::min((0.25 * p.kappa + disc).real(), (0.25 * p.kappa - disc).real());
    if (std::abs(slowest) < kMarginalTol * p.kappa) return Stability::Marginal;
    return slowest > 0.0 ? Stability::Stable : Stability::Unstable;
  }
  Eigen::Matrix<double, 5, 5> A = linearized_drift(p, d, z);
  // Balance the spin block against the field block before the eigen-solve.
  const double s = std::sqrt(p.n_atoms);
  Eigen::Matrix<double, 5, 1> scale;
  scale << 1.0, 1.0, s, s, s;
  const Eigen::Matrix<double, 5, 5> B = scale.asDiagonal().inverse() * A * scale.asDiagonal();
  Eigen::EigenSolver<Eigen::Matrix<double, 5, 5>> es(B, false);
  double max_re = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 5; ++i) max_re = std::max(max_re, es.eigenvalues()(i).real());
  if (std::abs(max_re) < kMarginalTol * d.Gamma) return Stability::Marginal;
  return max_re < 0.0 ? Stability::Stable : Stability::Unstable;
}

std::vector<MeanFieldState> steady_states(const SystemParams& p, const DerivedParams& d) {
  if (d.ideal()) return {to_state(p, d, ideal_steady_state(p, d))};
  const auto roots = solve_inversion_cubic(p, d);
  std::vector<MeanFieldState> out;
  out.reserve(roots.size());
  for (std::size_t i = 0; i < roots.size(); ++i) {
    out.push_back(branch_state(p, d, roots[i], static_cast<int>(i)));
  }
  return out;
}

BistabilityWindow bistability_window(double nc_eff) {
  BistabilityWindow w;
  if (!(nc_eff >= 8.0) || !std::isfinite(nc_eff)) return w;
  const double s = std::sqrt(1.0 - 8.0 / nc_eff);
  // 1 - s written without cancellation for large NC_eff.
  w.lower = (8.0 / nc_eff) / (1.0 + s) * std::pow(3.0 + s, 3) / 16.0;
  w.upper = (1.0 + s) * std::pow(3.0 - s, 3) / 16.0;
  w.exists = nc_eff > 8.0;
  return w;
}

std::vector<double> fold_points(double nc_eff) {
  // The drive along z has a local maximum and minimum exactly when three
  // roots exist; the fold drives are those extremal values. A coarse scan
  // brackets them and a golden-section search refines each one, so the
  // value is accurate to rounding even though z is only fixed to sqrt(eps).
  constexpr int kScan = 20000;
  const auto z_at = [](int i) { return -0.5 * std::pow(1e-9, static_cast<double>(i) / kScan); };
  int i_max = -1, i_min = -1;
  double prev2 = 0.0, prev1 = 0.0;
  for (int i = 0; i <= kScan; ++i) {
    const double f = drive_for_inversion(nc_eff, z_at(i));
    if (i >= 2) {
      if (prev1 > prev2 && prev1 > f && i_max < 0) i_max = i - 1;
      if (prev1 < prev2 && prev1 < f && i_min < 0) i_min = i - 1;
    }
    prev2 = prev1;
    prev1 = f;
  }
  if (i_max < 0 || i_min < 0) return {};

  const auto extremum = [nc_eff, &z_at](int i, double sign) {
    double a = z_at(i - 1), b = z_at(i + 1);
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    const auto f = [&](double z) { return sign * drive_for_inversion(nc_eff, z); };
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && std::abs(b - a) > 1e-15 * std::abs(c); ++it) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - r * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + r * (b - a);
        fd = f(d);
      }
    }
    return drive_for_inversion(nc_eff, 0.5 * (a + b));
  };
  const double upper = extremum(i_max, 1.0);
  const double lower = extremum(i_min, -1.0);
  if (!(lower < upper)) return {};
  const double inside = 0.5 * (lower + upper);
  if (solve_inversion_cubic(nc_eff, inside).size() != 3) return {};
  return {2.0 * lower, 2.0 * upper};
}

std::optional<DarkPoint> dark_point(const DerivedParams& d) {
  if (!(d.NC_eff > 1.0) || !std::isfinite(d.NC_eff) || !d.i0_defined) return std::nullopt;
  DarkPoint dp;
  dp.z = -0.5 / d.NC_eff;
  dp.alpha_in_sq = 8.0 * d.I0 * (d.NC_eff - 1.0) / (d.NC_eff * d.NC_eff);
  return dp;
}

// ---------------------------------------------------------------------------
// Static detuning: the steady state with constant delta reduces to a single
// real equation h(z, delta) = 0 for the normalized inversion.

namespace {

struct DetunedSystem {
  const SystemParams& p;
  const DerivedParams& d;
  double alpha_in;
  double delta_scale;

  DetunedSystem(const SystemParams& p_, const DerivedParams& d_)
      : p(p_), d(d_), alpha_in(std::sqrt(p_.alpha_in_sq)) {
    delta_scale = p.n_atoms * d.Cgamma + d.Gamma;
  }

  cplx denominator(double z, double delta) const {
    return 0.5 * p.kappa * cplx(0.5 * d.Gamma, -delta) - 2.0 * p.g * p.g * p.n_atoms * z;
  }

  cplx alpha(double z, double delta) const {
    return std::sqrt(p.kappa) * alpha_in * cplx(0.5 * d.Gamma, -delta) / denominator(z, delta);
  }

  double y_out(double z, double delta) const { return -std::sqrt(p.kappa) * alpha(z, delta).imag(); }

  double h(double z, double delta) const {
    if (d.ideal()) {
      const double s2 = p.alpha_in_sq / d.alpha_in_c_sq;
      const double eps = delta * p.kappa / (4.0 * p.g * p.g * p.n_atoms);
      return z * z + 0.25 * s2 * z * z / (z * z + eps * eps) - 0.25;
    }
    const double coupling = 2.0 * p.g * p.g * d.Gamma * p.kappa * p.alpha_in_sq / d.gamma_rad;
    return (z + 0.5) + coupling * z / std::norm(denominator(z, delta));
  }

  // Functions of the scaled pair (z, u = delta / delta_scale).
  double H(double z, double u) const { return h(z, u * delta_scale); }
  double Hz(double z, double u) const {
    const double e = 1e-7;
    return (H(z + e, u) - H(z - e, u)) / (2.0 * e);
  }
  double Hu(double z, double u) const {
    const double e = 1e-7 * std::max(1.0, std::abs(u));
    return (H(z, u + e) - H(z, u - e)) / (2.0 * e);
  }

  // Newton in z at fixed u.
  bool solve_z(double& z, double u) const {
    for (int it = 0; it < 50; ++it) {
      const double f = H(z, u);
      const double df = Hz(z, u);
      if (df == 0.0 || !std::isfinite(df)) return false;
      const double step = f / df;
      z -= step;
      if (!(z > -0.5 && z < 0.0)) return false;
      if (std::abs(step) < 1e-15) return true;
    }
    return std::abs(H(z, u)) < 1e-12;
  }
};

struct CurvePoint {
  double z;
  double u;
};

// Pseudo-arclength continuation of h(z, u) = 0 from (z0, 0) towards u_target.
// visit() is called on each accepted point and may return false to stop early.
// Returns the final point (on the curve at u_target unless stopped early).
CurvePoint continue_curve(const DetunedSystem& sys, double z0, double u_target,
                          const std::function<bool(const CurvePoint&)>& visit) {
  CurvePoint pt{z0, 0.0};
  if (!sys.solve_z(pt.z, 0.0)) {
    throw NoConvergenceError("starting state does not solve the steady-state equation", 0.0);
  }
  if (u_target == 0.0) return pt;
  const double dir = u_target > 0.0 ? 1.0 : -1.0;

  const auto tangent = [&](const CurvePoint& q, double tz_prev, double tu_prev) {
    double tz = -sys.Hu(q.z, q.u);
    double tu = sys.Hz(q.z, q.u);
    const double n = std::hypot(tz, tu);
    tz /= n;
    tu /= n;
    if (tz * tz_prev + tu * tu_prev < 0.0) {
      tz = -tz;
      tu = -tu;
    }
    return std::pair{tz, tu};
  };

  auto [tz, tu] = tangent(pt, 0.0, dir);
  double ds = 1e-3;
  constexpr double kMaxStep = 2e-2;
  for (int step = 0; step < 200000; ++step) {
    if (tu * dir <= 0.0) {
      throw NoConvergenceError("branch folds back before reaching the requested detuning",
                               pt.u * sys.delta_scale);
    }
    CurvePoint pred{pt.z + ds * tz, pt.u + ds * tu};
    CurvePoint q = pred;
    bool ok = false;
    int iters = 0;
    for (; iters < 12; ++iters) {
      const double f1 = sys.H(q.z, q.u);
      const double f2 = tz * (q.z - pred.z) + tu * (q.u - pred.u);
      const double a11 = sys.Hz(q.z, q.u), a12 = sys.Hu(q.z, q.u);
      const double det = a11 * tu - a12 * tz;
      if (det == 0.0 || !std::isfinite(det)) break;
      const double dz = (f1 * tu - a12 * f2) / det;
      const double du = (a11 * f2 - f1 * tz) / det;
      q.z -= dz;
      q.u -= du;
      if (!(q.z > -0.5 && q.z < 0.0)) break;
      if (std::abs(dz) + std::abs(du) < 1e-13) {
        ok = std::abs(sys.H(q.z, q.u)) < 1e-10;
        break;
      }
    }
    if (!ok) {
      ds *= 0.5;
      if (ds < 1e-12) {
        throw NoConvergenceError("continuation step collapsed", pt.u * sys.delta_scale);
      }
      continue;
    }

    if ((q.u - u_target) * dir >= 0.0) {
      // Crossed the target: land exactly on u_target.
      const double frac = (u_target - pt.u) / (q.u - pt.u);
      CurvePoint last{pt.z + frac * (q.z - pt.z), u_target};
      if (!sys.solve_z(last.z, u_target)) {
        throw NoConvergenceError("failed to land on the requested detuning",
                                 pt.u * sys.delta_scale);
      }
      visit(last);
      return last;
    }
    pt = q;
    std::tie(tz, tu) = tangent(pt, tz, tu);
    if (!visit(pt)) return pt;
    if (iters <= 3) ds = std::min(ds * 1.5, kMaxStep);
  }
  throw NoConvergenceError("continuation exceeded step budget", pt.u * sys.delta_scale);
}

}  // namespace

double static_detuning_response(const SystemParams& p, const DerivedParams& d, double delta0,
                                const MeanFieldState& branch) {
  if (!d.ideal()) require_nonideal(d);
  const DetunedSystem sys(p, d);
  if (delta0 == 0.0) return sys.y_out(branch.z, 0.0);
  const CurvePoint end =
      continue_curve(sys, branch.z, delta0 / sys.delta_scale, [](const CurvePoint&) { return true; });
  return sys.y_out(end.z, end.u * sys.delta_scale);
}

DispersivePeak dispersive_extremum(const SystemParams& p, const DerivedParams& d,
                                   const MeanFieldState& branch) {
  if (!d.ideal()) require_nonideal(d);
  const DetunedSystem sys(p, d);
  std::vector<CurvePoint> trace;
  double best = -std::numeric_limits<double>::infinity();
  continue_curve(sys, branch.z, 1e3, [&](const CurvePoint& q) {
    trace.push_back(q);
    const double y = sys.y_out(q.z, q.u * sys.delta_scale);
    if (y > best) {
      best = y;
      return true;
    }
    return trace.size() < 3 || y > 0.999 * best;
  });
  std::size_t imax = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (sys.y_out(trace[i].z, trace[i].u * sys.delta_scale) >=
        sys.y_out(trace[imax].z, trace[imax].u * sys.delta_scale)) {
      imax = i;
    }
  }
  if (imax == 0 || imax + 1 >= trace.size()) {
    throw NoConvergenceError("dispersive maximum not bracketed", trace.back().u * sys.delta_scale);
  }

  // Golden-section refinement on u with z tracked by Newton.
  double lo = trace[imax - 1].u, hi = trace[imax + 1].u;
  double z_guess = trace[imax].z;
  const auto y_at = [&](double u) {
    double z = z_guess;
    if (!sys.solve_z(z, u)) throw NoConvergenceError("lost branch near dispersive maximum", u * sys.delta_scale);
    return sys.y_out(z, u * sys.delta_scale);
  };
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - r * (hi - lo), e = lo + r * (hi - lo);
  double fc = y_at(c), fe = y_at(e);
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    if (fc > fe) {
      hi = e;
      e = c;
      fe = fc;
      c = hi - r * (hi - lo);
      fc = y_at(c);
    } else {
      lo = c;
      c = e;
      fc = fe;
      e = lo + r * (hi - lo);
      fe = y_at(e);
    }
  }
  const double u = 0.5 * (lo + hi);
  return {u * sys.delta_scale, y_at(u)};
}

}  // namespace cavlock
