// Acceptance run: one PASS/FAIL line per criterion. Exits nonzero when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "cavlock/oracle.hpp"
#include "cavlock/sweep.hpp"
#include "support.hpp"

using namespace cavlock;
using support::at_nc;
using support::with_drive;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

SystemParams strontium() {
  SystemParams p;
  p.g = kTwoPi * 4.0;
  p.kappa = kTwoPi * 1.6e5;
  p.gamma_d = kTwoPi * 3.0;
  p.gamma = kTwoPi * 3.0;
  p.n_atoms = 1e5;
  return p;
}

MeanFieldState operating_state(const SystemParams& p, const DerivedParams& d) {
  return d.ideal() ? to_state(p, d, ideal_steady_state(p, d)) : support::stable_branch(p, d);
}

Outcome sr_linewidth() {
  SystemParams p = strontium();
  p.alpha_in_sq = dark_point(derive(p))->alpha_in_sq;
  const auto d = derive(p);
  const auto rep = effective_linewidth(p, d, support::stable_branch(p, d));
  const bool pass = std::abs(d.NC_eff - 6.67) <= 0.1 && std::abs(rep.delta_f / 0.5e-3 - 1.0) <= 0.1;
  return {pass, fmt("NC_eff = %.4f, delta_f = %.4f mHz (%s); target 6.67 +- 0.1 and 0.5 mHz +- 10%%",
                    d.NC_eff, rep.delta_f * 1e3, to_string(rep.regime))};
}

Outcome sr_sensitivity() {
  SystemParams p = strontium();
  p.gamma = p.gamma_d = 0.0;
  p.alpha_in_sq = 0.5 * derive(p).alpha_in_c_sq;
  const auto d = derive(p);
  const auto s = operating_state(p, d);
  const double omega_a = kTwoPi * 4.292e14;
  const double rel = std::sqrt(estimator_stats(p, d, s, 1.0).sensitivity_sq) / omega_a;
  const bool pass = rel >= 0.5e-17 && rel <= 2e-17;
  return {pass, fmt("theta = %.4f, delta_Delta0 / omega_a = %.3g; target 1e-17 within a factor 2", s.theta, rel)};
}

Outcome window_bounds() {
  const auto w = bistability_window(100.0);
  const auto big = bistability_window(1e4);
  const double lo_ratio = big.lower / (16.0 / 1e4), hi_ratio = big.upper;
  const bool pass = std::abs(w.lower - 0.1584) <= 1e-3 && std::abs(w.upper - 1.0398) <= 1e-3 &&
                    std::abs(lo_ratio - 1) <= 0.02 && std::abs(hi_ratio - 1) <= 0.02;
  return {pass, fmt("NC_eff=100: [%.6f, %.6f] vs [0.1584, 1.0398] +- 1e-3 (errors %.2e, %.2e); "
                    "NC_eff=1e4: lower*NC/16 = %.5f, upper = %.5f",
                    w.lower, w.upper, w.lower - 0.1584, w.upper - 1.0398, lo_ratio, hi_ratio)};
}

Outcome dark_identity() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    double nc;
    do nc = std::pow(10.0, 4.0 * u(rng));
    while (!(nc > 1.0));
    const auto p = at_nc(nc);
    const auto d = derive(p);
    const double eq25 = linewidth_from_inversion(p, d, -0.5 / d.NC_eff);
    const double eq27 = d.Cgamma / 2.0 * d.Gamma / (p.gamma + p.gamma_p) * d.NC_eff / (d.NC_eff - 1.0);
    worst = std::max(worst, std::abs(eq25 / eq27 - 1.0));
  }
  return {worst < 1e-10, fmt("max relative difference over 100 draws = %.2e; target < 1e-10", worst)};
}

Outcome shot_noise() {
  const auto pi = support::ideal(std::numbers::pi / 4);
  const auto di = derive(pi);
  const auto si = operating_state(pi, di);
  double flat = 0.0;
  for (double w : log_grid(1e-3 * decay_rates(pi, di, si).lm.real(), 1e3 * pi.kappa, 1000)) {
    flat = std::max(flat, std::abs(spectrum_S_Yout(pi, di, si, w).S_Yout - 1.0));
  }
  double high = 0.0;
  for (const auto& p : {with_drive(at_nc(4.0), 1.5), with_drive(at_nc(4.0), 20.0), with_drive(at_nc(0.5), 0.3),
                        with_drive(at_nc(100.0), 0.05)}) {
    const auto d = derive(p);
    const auto s = support::stable_branch(p, d);
    high = std::max(high, std::abs(spectrum_S_Yout(p, d, s, 100.0 * p.kappa).S_Yout - 1.0));
  }
  return {flat < 1e-12 && high < 1e-3,
          fmt("ideal max |S-1| = %.2e (target < 1e-12); non-ideal |S(100 kappa)-1| = %.2e (target < 1e-3)", flat,
              high)};
}

Outcome oracle_spectra() {
  struct Case {
    const char* name;
    SystemParams p;
  };
  const Case cases[] = {
      {"ideal", support::ideal(std::numbers::pi / 4, 1e3, 1e4, 0.5)},
      {"dark", with_drive(at_nc(4.0, 1e3), 1.5)},
      {"strong", with_drive(at_nc(4.0, 1e3), 20.0)},
  };
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto d = derive(c.p);
    const auto s = operating_state(c.p, d);
    const auto rep = validate_spectrum(c.p, d, s, suggest_sim_config(c.p, d, s, 17));
    pass = pass && rep.passed && rep.n_segments >= 50;
    detail += fmt("%s%s: %zu segments, max|z| = %.2f vs %.2f", detail.empty() ? "" : "; ", c.name,
                  rep.n_segments, rep.max_abs_z, rep.threshold);
  }
  return {pass, detail};
}

Outcome closed_loop() {
  const auto p = with_drive(at_nc(4.0, 100.0), 1.5);
  const auto d = derive(p);
  const auto s = support::stable_branch(p, d);
  const auto r = decay_rates(p, d, s);
  const auto f = design_loop_filter(p, d, s, 0.4 * std::min(r.lp.real() / 2, p.kappa / 4));
  const auto corners = corner_frequencies(p, d, s);
  const auto est = simulate_closed_loop(p, d, s, f, 0.0, suggest_loop_sim_config(p, d, s, f, 31));
  const auto band = band_level(est, std::min(f.corner, corners.omega_S) / 10);
  const double target = effective_linewidth(p, d, s).two_pi_delta_f;
  const double ratio = band.mean / target;
  return {std::abs(ratio - 1.0) <= 0.1 && band.bins >= 3,
          fmt("low-band residual PSD / 2 pi delta_f = %.4f +- %.4f over %zu bins (ugf %.2f); target within 10%%",
              ratio, band.stderr_ / target, band.bins, f.ugf)};
}

Outcome corners() {
  const auto check = [](const SystemParams& p, double ws, double wr, std::string& detail, const char* name) {
    const auto d = derive(p);
    const auto c = corner_frequencies(p, d, operating_state(p, d));
    const double es = c.omega_S / ws - 1, er = c.omega_R / wr - 1;
    detail += fmt("%s%s: omega_S %.4f/%.4f, omega_R %.4f/%.4f", detail.empty() ? "" : "; ", name, c.omega_S, ws,
                  c.omega_R, wr);
    return std::abs(es) <= 0.05 && std::abs(er) <= 0.05;
  };
  std::string detail;
  bool pass = check(with_drive(at_nc(4.0), 1.5), 2.0, 1.0, detail, "dark");
  pass = check(with_drive(at_nc(4.0), 1e4), std::sqrt(4.25), 0.5, detail, "strong") && pass;
  const auto pi = support::ideal(std::numbers::pi / 4);
  const double ideal_corner = pi.n_atoms * derive(pi).Cgamma * std::cos(std::numbers::pi / 4) / 2;
  pass = check(pi, ideal_corner, ideal_corner, detail, "ideal") && pass;
  return {pass, detail + "; target within 5%"};
}

Outcome figures() {
  const auto f2 = run_sweep(sweep_from_config(preset_config("fig2d")));
  double worst = 0.0;
  int folds = 0;
  for (std::size_t i = 0; i < f2.rows.size(); ++i) {
    if (f2.text(i, "stability") != "fold") continue;
    ++folds;
    const double nc = f2.number(i, "NC_eff");
    const double x = 2.0 * f2.number(i, "alpha_in_sq_over_I0");
    const auto w = bistability_window(nc);
    worst = std::max(worst, std::min(std::abs(x - w.lower), std::abs(x - w.upper)));
  }
  const bool folds_ok = folds == 4 && worst <= 1e-6;

  const auto f3 = run_sweep(sweep_from_config(preset_config("fig3b")));
  std::vector<std::pair<double, double>> curve;
  for (std::size_t i = 0; i < f3.rows.size(); ++i) {
    if (f3.number(i, "NC_eff") != 4.0 || f3.text(i, "stability") != "stable") continue;
    curve.emplace_back(f3.number(i, "alpha_in_sq_over_I0"), f3.number(i, "delta_f_over_delta_f0"));
  }
  int minima = 0;
  double at = 0.0;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    if (curve[i].second < curve[i - 1].second && curve[i].second < curve[i + 1].second) {
      ++minima;
      at = curve[i].first;
    }
  }
  const bool min_ok = minima == 1 && std::abs(at / 1.5 - 1.0) <= 0.05;
  return {folds_ok && min_ok,
          fmt("fig2d: %d fold rows, max distance to window %.2e (target 1e-6); fig3b NC_eff=4: %d interior "
              "minimum at alpha_in^2/I0 = %.4f (target within 5%% of 1.5)",
              folds, worst, minima, at)};
}

Outcome cubic_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int mismatched = 0;
  for (int i = 0; i < 1000; ++i) {
    const double nc = std::pow(10.0, -1.0 + 5.0 * u(rng));
    const double drive = std::pow(10.0, -3.0 + 6.0 * u(rng));
    const auto mine = solve_inversion_cubic(nc, drive);
    const auto ref = support::companion_roots(nc, drive);
    if (mine.size() != ref.size()) {
      ++mismatched;
      continue;
    }
    for (std::size_t k = 0; k < mine.size(); ++k) {
      worst = std::max(worst, std::abs(mine[k] - ref[k]) / std::abs(ref[k]));
    }
  }
  return {mismatched == 0 && worst <= 1e-10,
          fmt("1000 draws: %d root-count mismatches, max relative root difference %.2e; target 1e-10", mismatched,
              worst)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"Sr dark-point linewidth", sr_linewidth},
      {"Sr estimator sensitivity", sr_sensitivity},
      {"Bistability window", window_bounds},
      {"Dark-point reduction identity", dark_identity},
      {"Shot-noise recovery", shot_noise},
      {"Oracle spectrum equivalence", oracle_spectra},
      {"Closed-loop linewidth", closed_loop},
      {"Corner frequencies", corners},
      {"Figure-data reproduction", figures},
      {"Cubic solver oracle", cubic_oracle},
  };
  int failed = 0, index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str(), sec);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d of 10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
