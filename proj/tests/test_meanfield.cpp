#include <cmath>
#include <random>

#include "cavlock/meanfield.hpp"
#include "approx.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cavlock;
using support::at_nc;
using support::with_drive;

TEST_SUITE("meanfield") {
  TEST_CASE("ideal steady state") {
    auto p = support::ideal(0.0);
    auto d = derive(p);
    auto s = ideal_steady_state(p, d);
    CHECK(s.theta == 0.0);
    CHECK(std::abs(s.J) == 0.0);
    CHECK(s.Z == rel(-p.n_atoms / 2));
    CHECK(s.alpha_out == 0.0);

    p = support::ideal(std::numbers::pi / 4);
    d = derive(p);
    s = ideal_steady_state(p, d);
    CHECK(s.theta == rel(std::numbers::pi / 4).epsilon(1e-12));
    CHECK(s.J.imag() == rel(-p.n_atoms * std::sin(s.theta) / 2));
    CHECK(s.alpha_out == rel(std::sqrt(p.alpha_in_sq)));

    p.alpha_in_sq = 1.01 * 1.01 * d.alpha_in_c_sq;
    try {
      ideal_steady_state(p, derive(p));
      FAIL("expected AboveThreshold");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::AboveThreshold);
    }
  }

  TEST_CASE("worked cubic roots") {
    auto r = solve_inversion_cubic(4.0, 1.125);
    REQUIRE(r.size() == 1);
    CHECK(r[0] == rel(-0.25).epsilon(1e-12));

    r = solve_inversion_cubic(4.0, 1.5);
    REQUIRE(r.size() == 1);
    CHECK(r[0] == rel(-0.125).epsilon(1e-12));

    r = solve_inversion_cubic(100.0, 0.25);
    CHECK(r.size() == 3);
    CHECK(support::scan_roots(100.0, 0.25).size() == 3);
  }

  TEST_CASE("degenerate input scale") {
    SystemParams p = at_nc(4.0);
    p.gamma = 0.0;
    p.gamma_d = 1.0;
    p.alpha_in_sq = 1.0;
    const auto d = derive(p);
    try {
      solve_inversion_cubic(p, d);
      FAIL("expected DegenerateScale");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DegenerateScale);
    }
  }

  TEST_CASE("branch observables") {
    const auto p4 = with_drive(at_nc(4.0), 1.125);
    const auto d4 = derive(p4);
    const auto s = branch_state(p4, d4, -0.25);
    CHECK(s.alpha_out == rel(std::sqrt(p4.alpha_in_sq) / 3).epsilon(1e-12));
    CHECK(std::abs(s.J.real()) < 1e-12 * std::abs(s.J));

    const auto pd = with_drive(at_nc(4.0), 1.5);
    const auto dark = branch_state(pd, derive(pd), -0.125);
    CHECK(std::abs(dark.alpha_out) < 1e-9 * std::sqrt(pd.alpha_in_sq));

    const auto ps = with_drive(at_nc(4.0), 1e8);
    const auto ds = derive(ps);
    const auto strong = support::stable_branch(ps, ds);
    CHECK(strong.alpha_out / std::sqrt(ps.alpha_in_sq) == rel(-1.0).epsilon(1e-6));
  }

  TEST_CASE("stability classification") {
    for (double drive : {0.05, 0.5, 1.125, 1.5, 3.0, 30.0}) {
      const auto p = with_drive(at_nc(4.0), drive);
      const auto d = derive(p);
      for (const auto& s : steady_states(p, d)) CHECK(s.stability == Stability::Stable);
    }

    auto p = with_drive(at_nc(10.0), 0.5 * 1.5);
    auto d = derive(p);
    auto states = steady_states(p, d);
    REQUIRE(states.size() == 3);
    CHECK(states[0].stability == Stability::Stable);
    CHECK(states[1].stability == Stability::Unstable);
    CHECK(states[2].stability == Stability::Stable);

    p = with_drive(at_nc(100.0), 0.25);
    d = derive(p);
    states = steady_states(p, d);
    REQUIRE(states.size() == 3);
    CHECK(states[0].stability == Stability::Stable);
    CHECK(states[1].stability == Stability::Unstable);
    CHECK(states[2].stability == Stability::Stable);
  }

  TEST_CASE("bistability window") {
    auto w = bistability_window(8.0);
    CHECK(w.lower == rel(27.0 / 16.0).epsilon(1e-12));
    CHECK(w.upper == rel(27.0 / 16.0).epsilon(1e-12));
    CHECK_FALSE(bistability_window(4.0).exists);
    CHECK_FALSE(bistability_window(std::numeric_limits<double>::infinity()).exists);

    w = bistability_window(100.0);
    CHECK(w.exists);
    CHECK(w.lower < w.upper);
    CHECK(w.lower == rel(0.1584).epsilon(1e-3));

    w = bistability_window(1e4);
    CHECK(w.lower * 1e4 / 16.0 == rel(1.0).epsilon(0.02));
    CHECK(w.upper == rel(1.0).epsilon(0.02));

    // Folds found by root counting agree with the closed form.
    for (double nc : {10.0, 30.0, 100.0, 1000.0, 1e4}) {
      const auto f = fold_points(nc);
      const auto cw = bistability_window(nc);
      REQUIRE(f.size() == 2);
      CHECK(f[0] == rel(cw.lower).epsilon(1e-12));
      CHECK(f[1] == rel(cw.upper).epsilon(1e-12));
    }
  }

  TEST_CASE("dark point") {
    auto dp = dark_point(derive(at_nc(4.0)));
    REQUIRE(dp);
    CHECK(dp->z == rel(-0.125));
    CHECK(dp->alpha_in_sq / derive(at_nc(4.0)).I0 == rel(1.5).epsilon(1e-12));
    CHECK_FALSE(dark_point(derive(at_nc(1.0))));
    CHECK_FALSE(dark_point(derive(at_nc(0.5))));
  }

  TEST_CASE("residuals and root counts over random draws") {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      const double nc = std::pow(10.0, -1.0 + 4.0 * u(rng));
      const double drive = std::pow(10.0, -3.0 + 4.0 * u(rng));
      const auto roots = solve_inversion_cubic(nc, drive);
      for (double z : roots) {
        CHECK(z > -0.5);
        CHECK(z < 0.0);
        CHECK(std::abs(cubic_residual(nc, drive, z)) < 1e-10);
      }
      const auto w = bistability_window(nc);
      const double x = 2.0 * drive;
      const bool inside = w.exists && x > w.lower && x < w.upper;
      CHECK(roots.size() == (inside ? 3u : 1u));
    }
  }

  TEST_CASE("output amplitude bounded by input on stable branches") {
    for (double nc : {0.5, 4.0, 20.0, 100.0}) {
      for (double drive : {0.01, 0.1, 0.3, 1.0, 3.0, 100.0}) {
        const auto p = with_drive(at_nc(nc), drive);
        const auto d = derive(p);
        for (const auto& s : steady_states(p, d)) {
          if (s.stability != Stability::Stable) continue;
          CHECK(std::abs(s.alpha_out) < std::sqrt(p.alpha_in_sq));
        }
      }
    }
  }

  TEST_CASE("ideal limit of the non-ideal branch") {
    const double theta = 0.6;
    auto p = support::ideal(theta, 1e4, 1e4, 1.0);
    const double ncg = p.n_atoms * 4.0 * p.g * p.g / p.kappa;
    p.gamma = 1e-4 * ncg;
    const auto d = derive(p);
    const auto s = support::stable_branch(p, d);
    const double j_ideal = -p.n_atoms * std::sin(theta) / 2;
    CHECK(s.J.imag() == rel(j_ideal).epsilon(0.01));
    // With only spontaneous emission the branch settles on a shorter Bloch
    // vector: z (z + 1/2) = -sin^2(theta) / 8, on the root nearer -1/2.
    const double z_lim = (-0.5 - std::sqrt(0.25 - 0.5 * std::sin(theta) * std::sin(theta))) / 2;
    CHECK(s.z == rel(z_lim).epsilon(0.01));
  }

  TEST_CASE("static detuning response") {
    const double theta = std::numbers::pi / 4;
    const auto p = support::ideal(theta, 1e4, 1e4, 1.0);
    const auto d = derive(p);
    const auto s = to_state(p, d, ideal_steady_state(p, d));
    CHECK(static_detuning_response(p, d, 0.0, s) == 0.0);

    const double ncg = p.n_atoms * 4.0 * p.g * p.g / p.kappa;
    const double d0 = 1e-4 * ncg;
    const double slope = static_detuning_response(p, d, d0, s) / d0;
    CHECK(std::abs(slope) == rel(std::sqrt(p.kappa) / (2 * p.g)).epsilon(1e-3));

    for (double x : {1e-3, 0.1, 0.5}) {
      const double a = static_detuning_response(p, d, x * ncg, s);
      const double b = static_detuning_response(p, d, -x * ncg, s);
      CHECK(std::abs(a + b) <= 1e-8 * std::abs(a));
    }

    const auto peak = dispersive_extremum(p, d, s);
    // Same order as NC gamma; at theta = pi/4 the peak sits at sqrt(3)/4 of it.
    CHECK(peak.delta / ncg == rel(std::sqrt(3.0) / 4.0).epsilon(1e-5));

    const auto pd = with_drive(at_nc(4.0), 1.5);
    const auto dd = derive(pd);
    const auto sd = support::stable_branch(pd, dd);
    for (double x : {0.01, 0.3, 1.0}) {
      const double a = static_detuning_response(pd, dd, x * dd.Gamma, sd);
      const double b = static_detuning_response(pd, dd, -x * dd.Gamma, sd);
      CHECK(std::abs(a + b) <= 1e-8 * std::abs(a));
    }
  }
}
