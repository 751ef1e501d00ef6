#include "cavlock/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace cavlock {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_number(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ConfigError, what + ": `" + s + "` is not a number");
}

double rate_scale(const Config& cfg) {
  const std::string units = cfg.text("units").value_or("rad");
  if (units == "rad") return 1.0;
  if (units == "hz") return kTwoPi;
  throw Error(ErrorCode::ConfigError, "units must be `hz` or `rad`, got `" + units + "`");
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::ConfigError, key + " expects true or false");
}

bool is_hard(const std::string& error) {
  return !error.empty() && error.rfind("AboveThreshold", 0) != 0 &&
         error.rfind("UnstableState", 0) != 0;
}

}  // namespace

SystemParams resolve(const PointConfig& pc) {
  SystemParams p = pc.params;
  if (pc.nc_eff) {
    const double Gamma = p.gamma + p.gamma_d + p.gamma_p;
    if (!(Gamma > 0.0)) throw Error(ErrorCode::ConfigError, "NC_eff cannot be set in ideal mode");
    if (!(*pc.nc_eff > 0.0)) throw Error(ErrorCode::ConfigError, "NC_eff must be positive");
    p.g = std::sqrt(*pc.nc_eff * p.kappa * Gamma / (4.0 * p.n_atoms));
  }
  if (pc.drive_ratio && pc.theta) {
    throw Error(ErrorCode::ConfigError, "set at most one of alpha_in_sq_over_I0 and theta");
  }
  if (pc.drive_ratio || pc.theta) {
    const DerivedParams d = derive(p);
    if (pc.theta) {
      if (!d.ideal()) throw Error(ErrorCode::ConfigError, "theta applies only in ideal mode");
      const double s = std::sin(*pc.theta);
      p.alpha_in_sq = s * s * d.alpha_in_c_sq;
    } else {
      // Ideal mode has no I0; the critical flux is the natural scale there.
      p.alpha_in_sq = *pc.drive_ratio * (d.ideal() ? d.alpha_in_c_sq : d.I0);
    }
  }
  return p;
}

PointReport run_point(const PointConfig& pc) {
  PointReport r;
  r.params = resolve(pc);
  r.validation = validate(r.params);
  r.derived = derive(r.params);
  r.window = bistability_window(r.derived);
  r.dark = dark_point(r.derived);
  const auto& p = r.params;
  const auto& d = r.derived;

  std::vector<MeanFieldState> states;
  try {
    states = steady_states(p, d);
  } catch (const Error& e) {
    r.error = e.what();
    r.hard_error = e.code() != ErrorCode::AboveThreshold;
    return r;
  }
  for (const auto& s : states) {
    BranchReport b;
    b.state = s;
    try {
      b.S_Yout0 = spectrum_S_Yout(p, d, s, 0.0, true).S_Yout;
      b.S_Yout0_closed = d.ideal() ? kNaN : spectrum_S_Yout_zero(d.NC_eff, s.z);
      if (d.ideal()) {
        const double cot = 1.0 / std::tan(s.theta);
        b.two_pi_delta_f = d.Cgamma * cot * cot / 4.0;
      } else {
        b.two_pi_delta_f = linewidth_from_inversion(p, d, s.z);
      }
      if (s.stability != Stability::Unstable) {
        b.linewidth = effective_linewidth(p, d, s);
        b.estimator = estimator_stats(p, d, s, pc.T);
      }
    } catch (const Error& e) {
      b.error = e.what();
    }
    r.branches.push_back(std::move(b));
  }
  return r;
}

std::string point_report_json(const PointReport& r) {
  using nlohmann::json;
  const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  j["version"] = kToolVersion;
  const auto& p = r.params;
  j["params"] = {{"g", p.g},           {"kappa", p.kappa},     {"gamma", p.gamma},
                 {"gamma_d", p.gamma_d}, {"gamma_p", p.gamma_p}, {"n_atoms", p.n_atoms},
                 {"alpha_in_sq", p.alpha_in_sq}};
  const auto& d = r.derived;
  j["derived"] = {{"Gamma", d.Gamma},       {"C", num(d.C)},
                  {"C_eff", num(d.C_eff)},  {"NC_eff", num(d.NC_eff)},
                  {"alpha_in_c_sq", d.alpha_in_c_sq}, {"I0", num(d.I0)},
                  {"Cgamma", d.Cgamma},     {"ideal", d.ideal()}};
  j["warnings"] = r.validation.warnings;
  j["bistability_window_2a2_over_I0"] =
      r.window.exists ? json{{"lower", r.window.lower}, {"upper", r.window.upper}} : json(nullptr);
  j["dark_point"] = r.dark ? json{{"z", r.dark->z}, {"alpha_in_sq", r.dark->alpha_in_sq},
                                  {"alpha_in_sq_over_I0", r.dark->alpha_in_sq / d.I0}}
                           : json(nullptr);
  if (!r.error.empty()) j["error"] = r.error;
  j["branches"] = json::array();
  for (const auto& b : r.branches) {
    json jb;
    const auto& s = b.state;
    jb["branch_id"] = s.branch_id;
    jb["stability"] = to_string(s.stability);
    jb["z"] = s.z;
    if (s.ideal) jb["theta"] = s.theta;
    jb["alpha"] = {s.alpha.real(), s.alpha.imag()};
    jb["J"] = {s.J.real(), s.J.imag()};
    jb["alpha_out"] = s.alpha_out;
    jb["S_Yout_0"] = num(b.S_Yout0);
    jb["two_pi_delta_f"] = num(b.two_pi_delta_f);
    if (b.linewidth) {
      const auto& lw = *b.linewidth;
      jb["linewidth"] = {{"delta_f_hz", num(lw.delta_f)},
                         {"two_pi_delta_f", num(lw.two_pi_delta_f)},
                         {"omega_S", num(lw.omega_S)},
                         {"omega_R", num(lw.omega_R)},
                         {"regime", to_string(lw.regime)},
                         {"linear_range", num(lw.linear_range)},
                         {"strong_field_form", num(lw.strong_field_form)},
                         {"dark_point_form", num(lw.dark_point_form)},
                         {"corners_resolved", lw.corners_resolved}};
    }
    if (b.estimator) {
      jb["estimator"] = {{"slope", b.estimator->slope},
                         {"variance", b.estimator->variance},
                         {"delta_Delta0", std::sqrt(b.estimator->sensitivity_sq)},
                         {"too_short", b.estimator->too_short}};
    }
    if (!b.error.empty()) jb["error"] = b.error;
    j["branches"].push_back(jb);
  }
  return j.dump(2);
}

const std::vector<std::string>& axis_names() {
  static const std::vector<std::string> names = {"alpha_in_sq_over_I0", "NC_eff", "gamma_p",
                                                 "theta"};
  return names;
}

std::vector<double> Axis::grid() const {
  if (scale == "values") return values;
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double f = static_cast<double>(i) / (n - 1);
    g[static_cast<std::size_t>(i)] =
        scale == "log" ? min * std::pow(max / min, f) : min + (max - min) * f;
  }
  return g;
}

Axis parse_axis(const std::string& spec, double rate_scale) {
  const auto w = split_words(spec);
  if (w.size() < 2) {
    throw Error(ErrorCode::ConfigError,
                "axis expects `name lin|log min max n` or `name values v1 v2 ...`");
  }
  Axis a;
  a.name = w[0];
  const auto& names = axis_names();
  if (std::find(names.begin(), names.end(), a.name) == names.end()) {
    std::string allowed;
    for (const auto& n : names) allowed += (allowed.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::ConfigError, "unknown axis `" + a.name + "`; allowed: " + allowed);
  }
  a.scale = w[1];
  const double unit = a.name == "gamma_p" ? rate_scale : 1.0;
  if (a.scale == "values") {
    for (std::size_t i = 2; i < w.size(); ++i) a.values.push_back(unit * to_number(w[i], a.name));
    if (a.values.empty()) throw Error(ErrorCode::ConfigError, "axis " + a.name + " has no values");
    a.n = static_cast<int>(a.values.size());
    return a;
  }
  if (a.scale != "lin" && a.scale != "log") {
    throw Error(ErrorCode::ConfigError, "axis scale must be lin, log or values");
  }
  if (w.size() != 5) throw Error(ErrorCode::ConfigError, "axis expects `name lin|log min max n`");
  a.min = unit * to_number(w[2], a.name);
  a.max = unit * to_number(w[3], a.name);
  const double n = to_number(w[4], a.name);
  if (!(n >= 2.0) || n != std::floor(n)) {
    throw Error(ErrorCode::ConfigError, "axis " + a.name + " needs an integer n >= 2");
  }
  a.n = static_cast<int>(n);
  if (a.scale == "log" && !(a.min > 0.0 && a.max > 0.0)) {
    throw Error(ErrorCode::ConfigError, "log axis bounds must be positive");
  }
  return a;
}

PointConfig point_from_config(const Config& cfg) {
  const double k = rate_scale(cfg);
  PointConfig pc;
  auto& p = pc.params;
  p.g = k * cfg.number("g").value_or(0.0);
  p.kappa = k * cfg.number("kappa").value_or(0.0);
  p.gamma = k * cfg.number("gamma").value_or(0.0);
  p.gamma_d = k * cfg.number("gamma_d").value_or(0.0);
  p.gamma_p = k * cfg.number("gamma_p").value_or(0.0);
  p.n_atoms = cfg.number("n_atoms").value_or(1.0);
  p.alpha_in_sq = cfg.number("alpha_in_sq").value_or(0.0);
  pc.nc_eff = cfg.number("NC_eff");
  pc.drive_ratio = cfg.number("alpha_in_sq_over_I0");
  pc.theta = cfg.number("theta");
  pc.T = cfg.number("T").value_or(1.0);
  if (cfg.has("alpha_in_sq") && (pc.drive_ratio || pc.theta)) {
    throw Error(ErrorCode::ConfigError,
                "alpha_in_sq conflicts with alpha_in_sq_over_I0 / theta; set only one");
  }
  if (!pc.nc_eff && !cfg.has("g")) throw Error(ErrorCode::ConfigError, "set g or NC_eff");
  return pc;
}

bool SweepConfig::wants(Output o) const {
  return std::find(outputs.begin(), outputs.end(), o) != outputs.end();
}

SweepConfig sweep_from_config(const Config& cfg) {
  SweepConfig s;
  const double k = rate_scale(cfg);
  const auto axis1 = cfg.text("axis1");
  if (!axis1) throw Error(ErrorCode::ConfigError, "sweep needs axis1");
  s.axis1 = parse_axis(*axis1, k);
  if (const auto a2 = cfg.text("axis2")) {
    s.axis2 = parse_axis(*a2, k);
    if (s.axis2->name == s.axis1.name) throw Error(ErrorCode::ConfigError, "axes must differ");
  }
  // An axis may stand in for a base key that the point parser requires.
  Config base = cfg;
  for (const Axis* a : {&s.axis1, s.axis2 ? &*s.axis2 : nullptr}) {
    if (!a) continue;
    if (a->name == "NC_eff" && !base.has("g") && !base.has("NC_eff")) base.set("NC_eff", "1");
  }
  s.base = point_from_config(base);
  if (const auto o = cfg.text("outputs")) {
    s.outputs.clear();
    for (const auto& w : split_words(*o)) {
      if (w == "steady_state") s.outputs.push_back(Output::SteadyState);
      else if (w == "spectrum") s.outputs.push_back(Output::Spectrum);
      else if (w == "linewidth") s.outputs.push_back(Output::Linewidth);
      else if (w == "corners") s.outputs.push_back(Output::Corners);
      else if (w == "validate") s.outputs.push_back(Output::Validate);
      else {
        throw Error(ErrorCode::ConfigError,
                    "unknown output `" + w +
                        "`; allowed: steady_state, spectrum, linewidth, corners, validate");
      }
    }
  }
  if (const auto v = cfg.text("normalize_linewidth")) s.normalize_linewidth = to_bool(*v, "normalize_linewidth");
  if (const auto v = cfg.text("folds")) s.folds = to_bool(*v, "folds");
  s.threads = static_cast<int>(cfg.number("threads").value_or(0.0));
  s.seed = static_cast<std::uint64_t>(cfg.number("seed").value_or(1.0));
  s.config_hash = cfg.hash();
  return s;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"fig2d", "fig3a", "fig3b"};
  return names;
}

Config preset_config(const std::string& name) {
  // Gamma = gamma = 1 sets the unit of rate; kappa = 1e4 Gamma keeps every
  // NC_eff inside the bad-cavity regime.
  const std::string base =
      "gamma = 1\nkappa = 10000\nn_atoms = 10000\n";
  if (name == "fig2d") {
    return Config::parse(base +
                             "axis1 = alpha_in_sq_over_I0 lin 0 3 601\n"
                             "axis2 = NC_eff values 4 10 100\n"
                             "outputs = steady_state\nfolds = true\n",
                         "preset:fig2d");
  }
  if (name == "fig3a") {
    return Config::parse(base +
                             "axis1 = alpha_in_sq_over_I0 lin 0.005 3 600\n"
                             "axis2 = NC_eff values 0.5 4 10 100\n"
                             "outputs = steady_state spectrum\nfolds = true\n",
                         "preset:fig3a");
  }
  if (name == "fig3b") {
    return Config::parse(base +
                             "axis1 = alpha_in_sq_over_I0 lin 0.005 3 600\n"
                             "axis2 = NC_eff values 0.5 4 10 100\n"
                             "outputs = linewidth\nnormalize_linewidth = true\nfolds = true\n",
                         "preset:fig3b");
  }
  std::string allowed;
  for (const auto& n : preset_names()) allowed += (allowed.empty() ? "" : ", ") + n;
  throw Error(ErrorCode::ConfigError, "unknown preset `" + name + "`; allowed: " + allowed);
}

std::vector<std::string> standard_metadata(std::uint64_t config_hash) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(config_hash));
  return {std::string("cavlock ") + kToolVersion, std::string("config_hash fnv1a64:") + hex,
          "rates in rad/s; window_lower/window_upper in units of 2 alpha_in_sq / I0"};
}

namespace {

void apply_axis(PointConfig& pc, const std::string& name, double v) {
  if (name == "alpha_in_sq_over_I0") pc.drive_ratio = v;
  else if (name == "NC_eff") pc.nc_eff = v;
  else if (name == "gamma_p") pc.params.gamma_p = v;
  else if (name == "theta") pc.theta = v;
}

struct Layout {
  std::vector<std::string> cols;
  void add(std::initializer_list<const char*> names) {
    for (const char* n : names) cols.emplace_back(n);
  }
};

std::vector<std::vector<Cell>> point_rows(const SweepConfig& sw, const Layout& layout, double v1,
                                          std::optional<double> v2) {
  PointConfig pc = sw.base;
  apply_axis(pc, sw.axis1.name, v1);
  if (sw.axis2) apply_axis(pc, sw.axis2->name, *v2);

  const std::size_t width = layout.cols.size();
  const auto blank = [&] {
    std::vector<Cell> row(width, kNaN);
    row[0] = v1;
    if (v2) row[1] = *v2;
    return row;
  };
  const auto idx = [&](const char* name) {
    return static_cast<std::size_t>(
        std::find(layout.cols.begin(), layout.cols.end(), name) - layout.cols.begin());
  };
  const auto put = [&](std::vector<Cell>& row, const char* name, Cell v) {
    const std::size_t i = idx(name);
    if (i < width) row[i] = std::move(v);
  };

  PointReport rep;
  try {
    rep = run_point(pc);
  } catch (const Error& e) {
    auto row = blank();
    put(row, "branch_id", -1.0);
    put(row, "stability", std::string("none"));
    put(row, "regime", std::string(""));
    put(row, "error", std::string(e.what()));
    return {row};
  }
  const auto& p = rep.params;
  const auto& d = rep.derived;
  const auto fill_common = [&](std::vector<Cell>& row) {
    put(row, "alpha_in_sq", p.alpha_in_sq);
    put(row, "alpha_in_sq_over_I0", d.i0_defined ? p.alpha_in_sq / d.I0 : kNaN);
    put(row, "NC_eff", d.NC_eff);
    put(row, "window_lower", rep.window.exists ? rep.window.lower : kNaN);
    put(row, "window_upper", rep.window.exists ? rep.window.upper : kNaN);
    const double two_ratio = 2.0 * p.alpha_in_sq / d.I0;
    put(row, "bistable",
        rep.window.exists && two_ratio > rep.window.lower && two_ratio < rep.window.upper ? 1.0
                                                                                          : 0.0);
    put(row, "dark_point_alpha_in_sq_over_I0", rep.dark ? rep.dark->alpha_in_sq / d.I0 : kNaN);
    put(row, "regime", std::string(""));
    put(row, "error", std::string(""));
  };
  if (!rep.error.empty()) {
    auto row = blank();
    fill_common(row);
    put(row, "branch_id", -1.0);
    put(row, "stability", std::string("none"));
    put(row, "error", rep.error);
    return {row};
  }

  std::vector<std::vector<Cell>> rows;
  for (const auto& b : rep.branches) {
    const auto& s = b.state;
    auto row = blank();
    fill_common(row);
    put(row, "branch_id", static_cast<double>(s.branch_id));
    put(row, "stability", std::string(to_string(s.stability)));
    put(row, "z", s.z);
    put(row, "theta", s.ideal ? s.theta : kNaN);
    put(row, "cubic_residual",
        d.ideal() ? kNaN : cubic_residual(d.NC_eff, p.alpha_in_sq / d.I0, s.z));
    put(row, "alpha_re", s.alpha.real());
    put(row, "alpha_im", s.alpha.imag());
    put(row, "J_re", s.J.real());
    put(row, "J_im", s.J.imag());
    put(row, "alpha_out", s.alpha_out);
    put(row, "S_Yout_0", b.S_Yout0);
    put(row, "S_Yout_0_closed", b.S_Yout0_closed);
    std::string err = b.error;
    const bool usable = s.stability != Stability::Unstable;
    if (sw.wants(Output::Linewidth)) {
      put(row, "two_pi_delta_f", b.two_pi_delta_f);
      put(row, "delta_f_hz", b.two_pi_delta_f / kTwoPi);
      if (!d.ideal() && d.gamma_rad > 0.0) {
        // 2 pi delta_f_0 = (Cgamma / 4)(Gamma / (gamma + gamma_p)) / 2
        const double df0 = 0.5 * (d.Cgamma / 4.0) * (d.Gamma / d.gamma_rad);
        put(row, "delta_f_over_delta_f0", b.two_pi_delta_f / df0);
      }
      if (b.linewidth) {
        put(row, "regime", std::string(to_string(b.linewidth->regime)));
        put(row, "linear_range", b.linewidth->linear_range);
      }
    }
    if (sw.wants(Output::Corners) && usable) {
      try {
        const Corners c = corner_frequencies(p, d, s);
        put(row, "omega_S", c.omega_S);
        put(row, "omega_R", c.omega_R);
        put(row, "omega_S_asym", c.omega_S_asym);
        put(row, "omega_R_asym", c.omega_R_asym);
        put(row, "corners_resolved", c.resolved ? 1.0 : 0.0);
      } catch (const Error& e) {
        err = e.what();
      }
    }
    if (sw.wants(Output::Validate) && s.stability == Stability::Stable) {
      try {
        SimConfig sim = suggest_sim_config(p, d, s, sw.seed);
        const auto cmp = validate_spectrum(p, d, s, sim);
        put(row, "oracle_max_z", cmp.max_abs_z);
        put(row, "oracle_threshold", cmp.threshold);
        put(row, "oracle_passed", cmp.passed ? 1.0 : 0.0);
      } catch (const Error& e) {
        err = e.what();
      }
    }
    put(row, "error", err);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

CsvDataset run_sweep(const SweepConfig& sw) {
  Layout layout;
  layout.cols.push_back(sw.axis1.name + "_axis");
  if (sw.axis2) layout.cols.push_back(sw.axis2->name + "_axis");
  layout.add({"branch_id", "stability", "z", "theta", "alpha_in_sq", "alpha_in_sq_over_I0",
              "NC_eff", "window_lower", "window_upper", "bistable",
              "dark_point_alpha_in_sq_over_I0", "cubic_residual"});
  if (sw.wants(Output::SteadyState)) layout.add({"alpha_re", "alpha_im", "J_re", "J_im", "alpha_out"});
  if (sw.wants(Output::Spectrum)) layout.add({"S_Yout_0", "S_Yout_0_closed"});
  if (sw.wants(Output::Linewidth)) {
    layout.add({"two_pi_delta_f", "delta_f_hz"});
    if (sw.normalize_linewidth) layout.add({"delta_f_over_delta_f0"});
    layout.add({"linear_range"});
  }
  if (sw.wants(Output::Corners)) {
    layout.add({"omega_S", "omega_R", "omega_S_asym", "omega_R_asym", "corners_resolved"});
  }
  if (sw.wants(Output::Validate)) layout.add({"oracle_max_z", "oracle_threshold", "oracle_passed"});
  layout.add({"regime", "error"});

  const auto g1 = sw.axis1.grid();
  const std::vector<double> g2 = sw.axis2 ? sw.axis2->grid() : std::vector<double>{kNaN};
  const std::size_t n_points = g1.size() * g2.size();
  std::vector<std::vector<std::vector<Cell>>> results(n_points);

  int workers = sw.threads > 0 ? sw.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n_points)));
  const auto job = [&](std::size_t i) {
    const double v2 = g2[i / g1.size()];
    results[i] = point_rows(sw, layout, g1[i % g1.size()],
                            sw.axis2 ? std::optional<double>(v2) : std::nullopt);
  };
  if (workers == 1) {
    for (std::size_t i = 0; i < n_points; ++i) job(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < n_points;
             i += static_cast<std::size_t>(workers)) {
          job(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  CsvDataset data;
  data.metadata = standard_metadata(sw.config_hash);
  data.columns = layout.cols;
  for (auto& group : results) {
    for (auto& row : group) data.rows.push_back(std::move(row));
  }

  if (sw.folds) {
    // Saddle-node rows, one pair per distinct NC_eff in grid order.
    std::vector<std::pair<double, std::optional<double>>> seen;
    const std::size_t nc_col = data.column("NC_eff");
    for (const auto& row : data.rows) {
      const double nc = std::get<double>(row[nc_col]);
      if (!std::isfinite(nc)) continue;
      const std::optional<double> v2 =
          sw.axis2 ? std::optional<double>(std::get<double>(row[1])) : std::nullopt;
      if (std::none_of(seen.begin(), seen.end(), [&](const auto& e) { return e.first == nc; })) {
        seen.emplace_back(nc, v2);
      }
    }
    const BistabilityWindow none{};
    for (const auto& [nc, v2] : seen) {
      const auto folds = fold_points(nc);
      const BistabilityWindow w = nc >= 8.0 ? bistability_window(nc) : none;
      for (std::size_t f = 0; f < folds.size(); ++f) {
        const double drive = 0.5 * folds[f];
        // The two merging roots sit just inside the window.
        const double inside = drive * (f == 0 ? 1.0 + 1e-9 : 1.0 - 1e-9);
        const auto roots = solve_inversion_cubic(nc, inside);
        double z = kNaN;
        if (roots.size() == 3) z = f == 0 ? 0.5 * (roots[1] + roots[2]) : 0.5 * (roots[0] + roots[1]);
        std::vector<Cell> row(data.columns.size(), kNaN);
        row[0] = sw.axis1.name == "alpha_in_sq_over_I0" ? drive : kNaN;
        if (sw.axis2) row[1] = sw.axis2->name == "alpha_in_sq_over_I0" ? drive : v2.value_or(kNaN);
        row[data.column("branch_id")] = -1.0;
        row[data.column("stability")] = std::string("fold");
        row[data.column("z")] = z;
        row[data.column("alpha_in_sq_over_I0")] = drive;
        row[nc_col] = nc;
        row[data.column("window_lower")] = w.exists ? w.lower : kNaN;
        row[data.column("window_upper")] = w.exists ? w.upper : kNaN;
        row[data.column("regime")] = std::string("");
        row[data.column("error")] = std::string("");
        data.rows.push_back(std::move(row));
      }
    }
  }
  return data;
}

std::size_t count_hard_errors(const CsvDataset& data) {
  const std::size_t col = data.column("error");
  std::size_t n = 0;
  for (const auto& row : data.rows) {
    if (const auto* s = std::get_if<std::string>(&row[col]); s && is_hard(*s)) ++n;
  }
  return n;
}

}  // namespace cavlock
