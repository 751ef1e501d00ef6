#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "cavlock/feedback.hpp"

namespace support {

using namespace cavlock;

// Gamma = gamma = 1 sets the rate unit; g follows from the requested NC_eff.
inline SystemParams at_nc(double nc_eff, double kappa = 1e4, double n_atoms = 1e4) {
  SystemParams p;
  p.gamma = 1.0;
  p.kappa = kappa;
  p.n_atoms = n_atoms;
  p.g = std::sqrt(nc_eff * kappa / (4.0 * n_atoms));
  return p;
}

inline SystemParams with_drive(SystemParams p, double drive_over_i0) {
  p.alpha_in_sq = drive_over_i0 * derive(p).I0;
  return p;
}

inline SystemParams ideal(double theta, double kappa = 1e4, double n_atoms = 1e4, double g = 1.0) {
  SystemParams p;
  p.kappa = kappa;
  p.n_atoms = n_atoms;
  p.g = g;
  const double s = std::sin(theta);
  p.alpha_in_sq = s * s * derive(p).alpha_in_c_sq;
  return p;
}

inline MeanFieldState stable_branch(const SystemParams& p, const DerivedParams& d) {
  for (const auto& s : steady_states(p, d)) {
    if (s.stability == Stability::Stable) return s;
  }
  throw Error(ErrorCode::UnstableState, "no stable branch");
}

// (z + 1/2)(z - a)^2 + (drive / 8) z = 0 written out by hand in extended
// precision; independent of the library's coefficient bookkeeping.
inline std::vector<long double> cubic_coefficients(long double nc, long double drive) {
  const long double a = 1.0L / (2.0L * nc);
  const long double c = drive / 8.0L;
  // z^3 + b2 z^2 + b1 z + b0
  const long double b2 = 0.5L - 2.0L * a;
  const long double b1 = a * a - a + c;
  const long double b0 = 0.5L * a * a;
  return {b2, b1, b0};
}

inline long double cubic_value(long double nc, long double drive, long double z) {
  const long double a = 1.0L / (2.0L * nc);
  return (z + 0.5L) * (z - a) * (z - a) + drive / 8.0L * z;
}

// Real roots from the eigenvalues of the companion matrix in long double.
inline std::vector<double> companion_roots(double nc, double drive) {
  const auto b = cubic_coefficients(nc, drive);
  Eigen::Matrix<long double, 3, 3> m = Eigen::Matrix<long double, 3, 3>::Zero();
  m(0, 0) = -b[0];
  m(0, 1) = -b[1];
  m(0, 2) = -b[2];
  m(1, 0) = 1.0L;
  m(2, 1) = 1.0L;
  Eigen::EigenSolver<Eigen::Matrix<long double, 3, 3>> es(m);
  std::vector<double> out;
  for (int i = 0; i < 3; ++i) {
    const auto ev = es.eigenvalues()(i);
    if (std::abs(ev.imag()) < 1e-9L * std::max(1.0L, std::abs(ev.real()))) {
      // Polish in long double.
      long double z = ev.real();
      for (int it = 0; it < 8; ++it) {
        const long double h = 1e-7L * std::max(std::abs(z), 1e-6L);
        const long double f = cubic_value(nc, drive, z);
        const long double df = (cubic_value(nc, drive, z + h) - cubic_value(nc, drive, z - h)) / (2 * h);
        if (df == 0.0L) break;
        z -= f / df;
      }
      if (z > -0.5L && z < 0.0L) out.push_back(static_cast<double>(z));
    }
  }
  std::sort(out.begin(), out.end());
  // Near a double root both eigenvalues may land on the same point.
  out.erase(std::unique(out.begin(), out.end(),
                        [](double x, double y) { return std::abs(x - y) < 1e-12; }),
            out.end());
  return out;
}

// Sign-change scan on a dense geometric grid, refined by bisection.
inline std::vector<double> scan_roots(double nc, double drive, int n = 40000) {
  std::vector<double> grid;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    grid.push_back(-0.5 * std::pow(1e-12, t));
  }
  std::vector<double> out;
  for (int i = 0; i < n; ++i) {
    long double lo = grid[i], hi = grid[i + 1];
    long double flo = cubic_value(nc, drive, lo), fhi = cubic_value(nc, drive, hi);
    if (flo == 0.0L) {
      out.push_back(static_cast<double>(lo));
      continue;
    }
    if ((flo < 0) == (fhi < 0)) continue;
    for (int it = 0; it < 200; ++it) {
      const long double mid = 0.5L * (lo + hi);
      const long double fm = cubic_value(nc, drive, mid);
      if ((fm < 0) == (flo < 0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    out.push_back(static_cast<double>(0.5L * (lo + hi)));
  }
  return out;
}

}  // namespace support
