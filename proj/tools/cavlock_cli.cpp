// Command-line front end: point reports, sweeps, spectra, linewidths and
// oracle runs driven by `name = value` config files.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "cavlock/sweep.hpp"

using namespace cavlock;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::string preset;
  std::string units;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "config file (name = value lines)");
  sub->add_option("--out", c.out, "output path (stdout when omitted)");
  sub->add_option("--preset", c.preset, "built-in config: fig2d, fig3a, fig3b");
  sub->add_option("--units", c.units, "units of rates in the config: hz or rad")
      ->check(CLI::IsMember({"hz", "rad"}));
  sub->add_option("--seed", c.seed, "RNG seed");
}

Config load(const Common& c) {
  if (c.config.empty() && c.preset.empty()) {
    throw Error(ErrorCode::ConfigError, "give --config or --preset");
  }
  Config cfg = c.preset.empty() ? Config::load(c.config) : preset_config(c.preset);
  if (!c.preset.empty() && !c.config.empty()) {
    // Config keys refine the preset.
    for (const auto& [k, e] : Config::load(c.config).entries()) cfg.set(k, e.value);
  }
  if (!c.units.empty()) cfg.set("units", c.units);
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  return cfg;
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(c.out);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + c.out + " for writing");
  f << text;
}

struct Resolved {
  SystemParams p;
  DerivedParams d;
  std::vector<MeanFieldState> states;
};

Resolved resolve_point(const Config& cfg) {
  Resolved r;
  r.p = resolve(point_from_config(cfg));
  for (const auto& w : validate(r.p).warnings) std::cerr << "warning: " << w << '\n';
  r.d = derive(r.p);
  r.states = steady_states(r.p, r.d);
  return r;
}

const MeanFieldState& first_stable(const Resolved& r) {
  for (const auto& s : r.states) {
    if (s.stability == Stability::Stable) return s;
  }
  throw Error(ErrorCode::UnstableState, "no stable steady state at this operating point");
}

SimConfig sim_from_config(const Config& cfg, SimConfig sim) {
  if (auto v = cfg.number("dt")) sim.dt = *v;
  if (auto v = cfg.number("duration")) sim.duration = *v;
  if (auto v = cfg.number("seed")) sim.seed = static_cast<std::uint64_t>(*v);
  if (auto v = cfg.number("n_trajectories")) sim.n_trajectories = static_cast<int>(*v);
  if (auto v = cfg.number("welch_segment")) sim.welch_segment = static_cast<std::size_t>(*v);
  if (auto v = cfg.number("record_stride")) sim.record_stride = static_cast<int>(*v);
  return sim;
}


json finite(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_point(const Common& c) {
  const Config cfg = load(c);
  const PointReport rep = run_point(point_from_config(cfg));
  emit(c, point_report_json(rep) + "\n");
  return rep.hard_error ? 1 : 0;
}

int cmd_sweep(const Common& c) {
  const Config cfg = load(c);
  const CsvDataset data = run_sweep(sweep_from_config(cfg));
  if (c.out.empty()) {
    write_csv(data, std::cout);
  } else {
    write_csv(data, c.out);
  }
  const std::size_t bad = count_hard_errors(data);
  if (bad) std::cerr << bad << " sweep rows failed; see the error column\n";
  return bad ? 3 : 0;
}

int cmd_spectrum(const Common& c) {
  const Config cfg = load(c);
  const Resolved r = resolve_point(cfg);
  const double k = cfg.text("units").value_or("rad") == "hz" ? kTwoPi : 1.0;
  CsvDataset data;
  data.metadata = standard_metadata(cfg.hash());
  data.columns = {"omega_rad_s", "branch_id", "S_Yout", "R_abs", "S_Delta"};
  for (const auto& s : r.states) {
    if (s.stability == Stability::Unstable) continue;
    std::vector<double> grid = default_grid(r.p, r.d, s, 400);
    if (cfg.has("omega_min") || cfg.has("omega_max") || cfg.has("n_omega")) {
      grid = log_grid(k * cfg.number("omega_min").value_or(grid.front()),
                      k * cfg.number("omega_max").value_or(grid.back()),
                      static_cast<std::size_t>(cfg.number("n_omega").value_or(400.0)));
    }
    for (double w : grid) {
      data.rows.push_back({w, static_cast<double>(s.branch_id),
                           spectrum_S_Yout(r.p, r.d, s, w).S_Yout,
                           std::abs(response_R(r.p, r.d, s, w)),
                           residual_noise_spectrum(r.p, r.d, s, w)});
    }
  }
  if (c.out.empty()) {
    write_csv(data, std::cout);
  } else {
    write_csv(data, c.out);
  }
  return 0;
}

int cmd_linewidth(const Common& c) {
  const Config cfg = load(c);
  const Resolved r = resolve_point(cfg);
  json out = json::array();
  for (const auto& s : r.states) {
    if (s.stability == Stability::Unstable) continue;
    const LinewidthReport lw = effective_linewidth(r.p, r.d, s);
    const Corners cr = corner_frequencies(r.p, r.d, s);
    out.push_back({{"branch_id", s.branch_id},
                   {"z", s.z},
                   {"NC_eff", finite(r.d.NC_eff)},
                   {"delta_f_hz", lw.delta_f},
                   {"two_pi_delta_f", lw.two_pi_delta_f},
                   {"regime", to_string(lw.regime)},
                   {"omega_S", finite(lw.omega_S)},
                   {"omega_R", finite(lw.omega_R)},
                   {"omega_S_asym", finite(cr.omega_S_asym)},
                   {"omega_R_asym", finite(cr.omega_R_asym)},
                   {"corners_resolved", lw.corners_resolved},
                   {"linear_range", finite(lw.linear_range)},
                   {"strong_field_form", finite(lw.strong_field_form)},
                   {"dark_point_form", finite(lw.dark_point_form)}});
  }
  emit(c, out.dump(2) + "\n");
  return 0;
}

int cmd_validate(const Common& c) {
  const Config cfg = load(c);
  const Resolved r = resolve_point(cfg);
  const MeanFieldState& s = first_stable(r);
  SimConfig sim = sim_from_config(cfg, suggest_sim_config(r.p, r.d, s));
  std::vector<TimeSeries> runs;
  for (int i = 0; i < sim.n_trajectories; ++i) runs.push_back(simulate_linearized(r.p, r.d, s, sim, i));
  const PsdEstimate est = welch_psd(runs, sim);
  const auto expected = expected_welch_psd(r.p, r.d, s, sim.record_step(), sim.welch_segment);
  const ComparisonReport rep = compare_psd(est, expected);
  if (!c.out.empty()) write_psd_csv(c.out, est);
  const json summary = {{"branch_id", s.branch_id},
                        {"n_segments", rep.n_segments},
                        {"bins", rep.z_score.size()},
                        {"max_abs_z", rep.max_abs_z},
                        {"threshold", rep.threshold},
                        {"passed", rep.passed},
                        {"zero_bin", rep.zero_bin_measured},
                        {"zero_bin_stderr", rep.zero_bin_stderr},
                        {"zero_bin_expected", expected[0]},
                        {"S_Yout_0", spectrum_S_Yout(r.p, r.d, s, 0.0).S_Yout}};
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_loop_sim(const Common& c) {
  const Config cfg = load(c);
  const Resolved r = resolve_point(cfg);
  const MeanFieldState& s = first_stable(r);
  const double k = cfg.text("units").value_or("rad") == "hz" ? kTwoPi : 1.0;
  const DecayRates rates = decay_rates(r.p, r.d, s);
  const double ugf =
      cfg.has("ugf") ? k * *cfg.number("ugf")
                     : 0.4 * std::min(0.5 * rates.lp.real(), 0.25 * r.p.kappa);
  const LoopFilter filter = design_loop_filter(r.p, r.d, s, ugf);
  SimConfig sim = sim_from_config(cfg, suggest_loop_sim_config(r.p, r.d, s, filter));
  const double bare = cfg.number("bare_psd").value_or(0.0);
  const PsdEstimate est = simulate_closed_loop(r.p, r.d, s, filter, bare, sim);
  if (!c.out.empty()) write_psd_csv(c.out, est);
  const BandLevel band = band_level(est, filter.corner / 10.0);
  const double s0 = residual_noise_spectrum(r.p, r.d, s, 0.0);
  const LoopMargins m = loop_margins(r.p, r.d, s, filter);
  const json summary = {{"ugf", ugf},
                        {"gain", filter.gain},
                        {"corner", filter.corner},
                        {"phase_margin_deg", m.phase_margin_deg},
                        {"n_segments", est.n_segments},
                        {"low_band_psd", band.mean},
                        {"low_band_stderr", band.stderr_},
                        {"low_band_bins", band.bins},
                        {"S_Delta_0", s0},
                        {"ratio", band.mean / s0}};
  std::cout << summary.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-stabilization analysis of a driven atom-cavity system"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  Common common;
  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const Common&);
  };
  const Sub subs[] = {
      {"point", "steady states, spectra and linewidth at one operating point (JSON)", cmd_point},
      {"sweep", "1D/2D parameter sweep (CSV)", cmd_sweep},
      {"spectrum", "S_Yout, |R| and S_Delta on a frequency grid (CSV)", cmd_spectrum},
      {"linewidth", "effective linewidth and corner frequencies (JSON)", cmd_linewidth},
      {"validate", "compare simulated and analytic output spectra", cmd_validate},
      {"loop-sim", "simulate the PI servo loop and report residual noise", cmd_loop_sim},
  };
  int (*chosen)(const Common&) = nullptr;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_common(sub, common);
    sub->callback([&chosen, run = s.run] { chosen = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    return chosen(common);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
