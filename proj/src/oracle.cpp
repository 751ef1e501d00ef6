#include "cavlock/oracle.hpp"

#include <fftw3.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

#include "json.hpp"

namespace cavlock {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr char kMagic[8] = {'C', 'A', 'V', 'L', 'K', 'T', 'S', '1'};
constexpr int kImages = 40;
constexpr double kFamilyLevel = 0.0026997960632601866;  // two-sided 3 sigma

// Discrete-time form of dx = F x dt + G dW over a step h, via Van Loan's
// block exponential: x(t+h) = phi x(t) + eta with Cov(eta) = q.
struct Discrete {
  MatrixXd phi;
  MatrixXd noise;  // noise * standard normals has covariance q
};

Discrete discretize(const MatrixXd& F, const MatrixXd& GGt, double h) {
  const Eigen::Index n = F.rows();
  MatrixXd M = MatrixXd::Zero(2 * n, 2 * n);
  M.topLeftCorner(n, n) = -F * h;
  M.topRightCorner(n, n) = GGt * h;
  M.bottomRightCorner(n, n) = F.transpose() * h;
  const MatrixXd E = M.exp();
  Discrete out;
  out.phi = E.bottomRightCorner(n, n).transpose();
  MatrixXd q = out.phi * E.topRightCorner(n, n);
  q = 0.5 * (q + q.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(q);
  const VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  out.noise = es.eigenvectors() * ev.asDiagonal();
  return out;
}

std::mt19937_64 stream(std::uint64_t seed, int trajectory, int channel) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trajectory), static_cast<std::uint32_t>(channel)};
  return std::mt19937_64(seq);
}

struct YSector {
  Eigen::Matrix2d A;
  double atom_noise = 0.0;   // sqrt(N Gamma) / 2
  double input_noise = 0.0;  // sqrt(kappa) / 2
  double drive = 0.0;        // iJ, coefficient of the detuning in dSx
};

YSector y_sector(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s) {
  YSector y;
  y.A << -d.Gamma / 2.0, -2.0 * p.g * p.n_atoms * s.z, -p.g, -p.kappa / 2.0;
  y.atom_noise = std::sqrt(p.n_atoms * d.Gamma) / 2.0;
  y.input_noise = std::sqrt(p.kappa) / 2.0;
  y.drive = s.iJ();
  return y;
}

double slowest_rate(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s) {
  return decay_rates(p, d, s).lm.real();
}

void require_stable(const MeanFieldState& s) {
  if (s.stability == Stability::Unstable) {
    throw Error(ErrorCode::UnstableState, "cannot simulate fluctuations about an unstable branch");
  }
}

template <class Job>
void run_parallel(int n, Job job) {
  const int workers =
      std::max(1, std::min<int>(n, static_cast<int>(std::thread::hardware_concurrency())));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::vector<std::thread> pool;
  std::mutex m;
  std::exception_ptr err;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

double normal_quantile_upper(double p) {
  // z with erfc(z / sqrt 2) = p
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::erfc(mid / std::numbers::sqrt2) > p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void check_sim_config(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s,
                      const SimConfig& sim) {
  const double lm = slowest_rate(p, d, s);
  if (!(sim.dt > 0.0) || !(sim.dt < 0.1 / p.kappa)) {
    throw Error(ErrorCode::ConfigError, "dt must satisfy 0 < dt < 0.1/kappa");
  }
  if (sim.record_stride < 1) throw Error(ErrorCode::ConfigError, "record_stride must be >= 1");
  if (sim.n_trajectories < 1) throw Error(ErrorCode::ConfigError, "n_trajectories must be >= 1");
  if (!(lm > 0.0)) throw Error(ErrorCode::ConfigError, "slowest decay rate is not positive");
  if (!(sim.duration > 100.0 / lm)) {
    throw Error(ErrorCode::ConfigError, "duration must exceed 100/Re(l-)");
  }
  if (!(static_cast<double>(sim.welch_segment) * sim.record_step() > 20.0 / lm)) {
    throw Error(ErrorCode::ConfigError, "welch_segment * record step must exceed 20/Re(l-)");
  }
}

SimConfig suggest_sim_config(const SystemParams& p, const DerivedParams& d,
                             const MeanFieldState& s, std::uint64_t seed) {
  const double lm = slowest_rate(p, d, s);
  SimConfig sim;
  sim.seed = seed;
  sim.dt = 0.05 / p.kappa;
  const double h_target = std::min(2.0 / p.kappa, 0.05 / lm);
  sim.record_stride = std::max(1, static_cast<int>(std::floor(h_target / sim.dt)));
  const double h = sim.record_step();
  std::size_t seg = 256;
  while (static_cast<double>(seg) * h < 25.0 / lm) seg *= 2;
  sim.welch_segment = seg;
  const double transient = 20.0 / lm;
  sim.duration = transient + static_cast<double>(seg) * h * 32.5;
  return sim;
}

SimConfig suggest_loop_sim_config(const SystemParams& p, const DerivedParams& d,
                                  const MeanFieldState& s, const LoopFilter& filter,
                                  std::uint64_t seed) {
  const double lm = slowest_rate(p, d, s);
  SimConfig sim;
  sim.seed = seed;
  sim.dt = 0.05 / p.kappa;
  sim.record_stride = std::max(1, static_cast<int>(std::floor(0.1 / filter.ugf / sim.dt)));
  const double h = sim.record_step();
  const double span = std::max(2.0 * std::numbers::pi * 50.0 / filter.corner, 25.0 / lm);
  std::size_t seg = 256;
  while (static_cast<double>(seg) * h < span) seg *= 2;
  sim.welch_segment = seg;
  const double transient = 20.0 / std::min(lm, filter.corner);
  sim.duration = transient + static_cast<double>(seg) * h * 100.5;
  return sim;
}

TimeSeries simulate_linearized(const SystemParams& p, const DerivedParams& d,
                               const MeanFieldState& s, const SimConfig& sim, int trajectory) {
  require_stable(s);
  check_sim_config(p, d, s, sim);
  const double h = sim.record_step();
  const YSector ys = y_sector(p, d, s);

  // Y sector augmented with the block integrals of Sx, Y and the input
  // Wiener increment: (Sx, Y, int Sx, int Y, W_in).
  MatrixXd F = MatrixXd::Zero(5, 5);
  F.topLeftCorner(2, 2) = ys.A;
  F(2, 0) = 1.0;
  F(3, 1) = 1.0;
  MatrixXd G = MatrixXd::Zero(5, 2);
  G(0, 0) = ys.atom_noise;
  G(1, 1) = ys.input_noise;
  G(4, 1) = 1.0;
  const Discrete yd = discretize(F, G * G.transpose(), h);

  // X sector, sampled instantaneously.
  MatrixXd Fx;
  MatrixXd Gx;
  if (s.ideal) {
    // (S_perp, X)
    Fx.resize(2, 2);
    Fx << 0.0, p.g * p.n_atoms, -p.g * std::cos(s.theta), -p.kappa / 2.0;
    Gx = MatrixXd::Zero(2, 1);
    Gx(1, 0) = std::sqrt(p.kappa) / 2.0;
  } else {
    // (Im dJ, X, dZ); the F^x-F^z cross-correlators are dropped.
    const double a0 = s.alpha.real();
    const double ji0 = s.J.imag();
    const double g = p.g;
    const double gr = d.gamma_rad;
    Fx.resize(3, 3);
    Fx << -d.Gamma / 2.0, 2.0 * g * p.n_atoms * s.z, 2.0 * g * a0,
        g, -p.kappa / 2.0, 0.0,
        -2.0 * g * a0, -2.0 * g * ji0, -gr;
    Gx = MatrixXd::Zero(3, 3);
    Gx(0, 0) = std::sqrt(p.n_atoms * d.Gamma) / 2.0;
    Gx(1, 1) = std::sqrt(p.kappa) / 2.0;
    Gx(2, 2) = std::sqrt(p.n_atoms * gr * std::max(0.0, s.z + 0.5));
  }
  const Discrete xd = discretize(Fx, Gx * Gx.transpose(), h);
  const Eigen::Index nx = Fx.rows();
  constexpr int x_index = 1;
  constexpr int perp_index = 0;

  const double transient = 20.0 / slowest_rate(p, d, s);
  const auto n_skip = static_cast<std::size_t>(std::ceil(transient / h));
  const auto n_rec = static_cast<std::size_t>(std::floor((sim.duration - transient) / h));
  if (sim.duration <= transient || n_rec < 2) {
    throw Error(ErrorCode::ConfigError, "duration leaves no samples after the transient");
  }

  auto rng_y = stream(sim.seed, trajectory, 0);
  auto rng_x = stream(sim.seed, trajectory, 1);
  std::normal_distribution<double> normal;

  TimeSeries ts;
  ts.record_step = h;
  for (auto* v : {&ts.t, &ts.sx, &ts.y, &ts.x, &ts.s_perp, &ts.y_in, &ts.y_out}) v->resize(n_rec);

  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  VectorXd vx = VectorXd::Zero(nx);
  Eigen::Matrix<double, 5, 1> eta;
  VectorXd etax(nx);
  const Eigen::Matrix<double, 5, 2> phi_y = yd.phi.leftCols(2);
  const Eigen::Matrix<double, 5, 5> noise_y = yd.noise;
  const double sqrt_kappa = std::sqrt(p.kappa);

  for (std::size_t k = 0; k < n_skip + n_rec; ++k) {
    for (int i = 0; i < 5; ++i) eta(i) = normal(rng_y);
    for (Eigen::Index i = 0; i < nx; ++i) etax(i) = normal(rng_x);
    const Eigen::Matrix<double, 5, 1> next = phi_y * v + noise_y * eta;
    vx = xd.phi * vx + xd.noise * etax;
    v = next.head<2>();
    if (k < n_skip) continue;
    const std::size_t r = k - n_skip;
    ts.t[r] = static_cast<double>(r + 1) * h;
    ts.sx[r] = next(2) / h;
    ts.y[r] = next(3) / h;
    ts.y_in[r] = next(4) / (2.0 * h);
    ts.y_out[r] = ts.y_in[r] - sqrt_kappa * ts.y[r];
    ts.x[r] = vx(x_index);
    ts.s_perp[r] = vx(perp_index);
  }
  return ts;
}

PsdEstimate welch(const std::vector<std::vector<double>>& series, double step, std::size_t L,
                  double scale) {
  if (L < 4 || L % 2 != 0) throw Error(ErrorCode::ConfigError, "Welch segment must be even and >= 4");
  std::size_t n_seg = 0;
  for (const auto& x : series) {
    if (x.size() >= L) n_seg += (x.size() - L) / (L / 2) + 1;
  }
  if (n_seg < 2) throw Error(ErrorCode::TooShort, "series shorter than two Welch segments");

  std::vector<double> w(L);
  double w2 = 0.0;
  for (std::size_t n = 0; n < L; ++n) {
    w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(L)));
    w2 += w[n] * w[n];
  }
  double lag = 0.0;
  for (std::size_t n = 0; n + L / 2 < L; ++n) lag += w[n] * w[n + L / 2];
  const double rho = (lag / w2) * (lag / w2);

  const std::size_t nb = L / 2 + 1;
  double* in = fftw_alloc_real(L);
  fftw_complex* out = fftw_alloc_complex(nb);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(L), in, out, FFTW_ESTIMATE);

  std::vector<double> sum(nb, 0.0), sum2(nb, 0.0);
  const double norm = scale * step / w2;
  for (const auto& x : series) {
    for (std::size_t start = 0; start + L <= x.size(); start += L / 2) {
      for (std::size_t n = 0; n < L; ++n) in[n] = w[n] * x[start + n];
      fftw_execute(plan);
      for (std::size_t k = 0; k < nb; ++k) {
        const double pk = norm * (out[k][0] * out[k][0] + out[k][1] * out[k][1]);
        sum[k] += pk;
        sum2[k] += pk * pk;
      }
    }
  }
  fftw_destroy_plan(plan);
  fftw_free(in);
  fftw_free(out);

  PsdEstimate est;
  est.n_segments = n_seg;
  est.omega.resize(nb);
  est.psd.resize(nb);
  est.stderr_.resize(nb);
  const double nsd = static_cast<double>(n_seg);
  for (std::size_t k = 0; k < nb; ++k) {
    est.omega[k] = 2.0 * std::numbers::pi * static_cast<double>(k) / (static_cast<double>(L) * step);
    const double mean = sum[k] / nsd;
    const double var = std::max(0.0, (sum2[k] - nsd * mean * mean) / (nsd - 1.0));
    est.psd[k] = mean;
    // Adjacent half-overlapping segments are weakly correlated.
    est.stderr_[k] = std::sqrt(var / nsd * (1.0 + 2.0 * rho));
  }
  return est;
}

PsdEstimate welch_psd(const std::vector<TimeSeries>& series, const SimConfig& sim) {
  std::vector<std::vector<double>> records;
  records.reserve(series.size());
  for (const auto& s : series) records.push_back(s.y_out);
  return welch(records, sim.record_step(), sim.welch_segment, 4.0);
}

PsdEstimate welch_psd(const TimeSeries& series, const SimConfig& sim) {
  return welch(std::vector<std::vector<double>>{series.y_out}, sim.record_step(),
               sim.welch_segment, 4.0);
}

double expected_block_psd(const SystemParams& p, const DerivedParams& d, const MeanFieldState& s,
                          double omega, double h) {
  // Block averaging multiplies by sinc^2 and folds images; the shot-noise
  // floor folds back to exactly 1.
  const double period = 2.0 * std::numbers::pi / h;
  double acc = 1.0;
  for (int k = -kImages; k <= kImages; ++k) {
    const double w = omega + k * period;
    const double x = 0.5 * w * h;
    const double sinc = x == 0.0 ? 1.0 : std::sin(x) / x;
    acc += (spectrum_S_Yout(p, d, s, std::abs(w)).S_Yout - 1.0) * sinc * sinc;
  }
  return acc;
}

std::vector<double> expected_welch_psd(const SystemParams& p, const DerivedParams& d,
                                       const MeanFieldState& s, double h, std::size_t L) {
  // Autocovariance of the sampled record from its spectrum on a fine grid,
  // then the lag-window form of the expected Hann periodogram.
  const std::size_t nf = 4 * L;
  double* spec = fftw_alloc_real(nf);
  fftw_complex* cov_c = fftw_alloc_complex(nf / 2 + 1);
  for (std::size_t j = 0; j <= nf / 2; ++j) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(j) / (static_cast<double>(nf) * h);
    spec[j] = expected_block_psd(p, d, s, w, h);
    if (j > 0 && j < nf / 2) spec[nf - j] = spec[j];
  }
  fftw_plan pc = fftw_plan_dft_r2c_1d(static_cast<int>(nf), spec, cov_c, FFTW_ESTIMATE);
  fftw_execute(pc);
  fftw_destroy_plan(pc);
  std::vector<double> cov(L);
  for (std::size_t t = 0; t < L; ++t) cov[t] = cov_c[t][0] / (static_cast<double>(nf) * h);
  fftw_free(spec);
  fftw_free(cov_c);

  // Window autocorrelation through a zero-padded transform.
  const std::size_t n2 = 2 * L;
  double* buf = fftw_alloc_real(n2);
  fftw_complex* wf = fftw_alloc_complex(n2 / 2 + 1);
  double w2 = 0.0;
  for (std::size_t n = 0; n < n2; ++n) {
    buf[n] = n < L ? 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                           static_cast<double>(L)))
                   : 0.0;
    w2 += buf[n] * buf[n];
  }
  fftw_plan pf = fftw_plan_dft_r2c_1d(static_cast<int>(n2), buf, wf, FFTW_ESTIMATE);
  fftw_execute(pf);
  fftw_destroy_plan(pf);
  for (std::size_t k = 0; k <= n2 / 2; ++k) {
    wf[k][0] = wf[k][0] * wf[k][0] + wf[k][1] * wf[k][1];
    wf[k][1] = 0.0;
  }
  fftw_plan pb = fftw_plan_dft_c2r_1d(static_cast<int>(n2), wf, buf, FFTW_ESTIMATE);
  fftw_execute(pb);
  fftw_destroy_plan(pb);
  std::vector<double> cw(L);
  for (std::size_t t = 0; t < L; ++t) cw[t] = buf[t] / static_cast<double>(n2);
  fftw_free(buf);
  fftw_free(wf);

  double* a = fftw_alloc_real(L);
  fftw_complex* af = fftw_alloc_complex(L / 2 + 1);
  a[0] = cw[0] * cov[0];
  for (std::size_t t = 1; t < L; ++t) a[t] = cw[t] * cov[t] + cw[L - t] * cov[L - t];
  fftw_plan pa = fftw_plan_dft_r2c_1d(static_cast<int>(L), a, af, FFTW_ESTIMATE);
  fftw_execute(pa);
  fftw_destroy_plan(pa);
  std::vector<double> out(L / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = h * af[k][0] / w2;
  fftw_free(a);
  fftw_free(af);
  return out;
}

ComparisonReport compare_psd(const PsdEstimate& est, const std::vector<double>& expected) {
  ComparisonReport rep;
  const std::size_t nb = est.psd.size();
  if (expected.size() != nb || nb < 3) {
    throw Error(ErrorCode::ConfigError, "expected spectrum does not match the estimate grid");
  }
  rep.n_segments = est.n_segments;
  rep.zero_bin_measured = est.psd[0];
  rep.zero_bin_expected = expected[0];
  rep.zero_bin_stderr = est.stderr_[0];

  // Each bin is a scaled chi-square; its effective degrees of freedom come
  // from the pooled relative scatter, and Wilson-Hilferty maps it to a z.
  std::vector<double> rel;
  for (std::size_t k = 1; k + 1 < nb; ++k) {
    if (est.psd[k] > 0.0) rel.push_back(est.stderr_[k] / est.psd[k]);
  }
  std::nth_element(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(rel.size() / 2), rel.end());
  const double r_med = rel[rel.size() / 2];
  rep.dof = 2.0 / (r_med * r_med);
  const double c = 2.0 / (9.0 * rep.dof);

  const std::size_t m = nb - 2;
  rep.threshold = normal_quantile_upper(kFamilyLevel / static_cast<double>(m));
  for (std::size_t k = 1; k + 1 < nb; ++k) {
    const double ratio = est.psd[k] / expected[k];
    const double z = (std::cbrt(ratio) - (1.0 - c)) / std::sqrt(c);
    rep.omega.push_back(est.omega[k]);
    rep.measured.push_back(est.psd[k]);
    rep.expected.push_back(expected[k]);
    rep.z_score.push_back(z);
    rep.max_abs_z = std::max(rep.max_abs_z, std::abs(z));
  }
  rep.passed = rep.max_abs_z < rep.threshold;
  return rep;
}

ComparisonReport validate_spectrum(const SystemParams& p, const DerivedParams& d,
                                   const MeanFieldState& s, const SimConfig& sim) {
  require_stable(s);
  check_sim_config(p, d, s, sim);
  std::vector<TimeSeries> runs(static_cast<std::size_t>(sim.n_trajectories));
  run_parallel(sim.n_trajectories, [&](int i) {
    runs[static_cast<std::size_t>(i)] = simulate_linearized(p, d, s, sim, i);
  });
  const PsdEstimate est = welch_psd(runs, sim);
  ComparisonReport rep =
      compare_psd(est, expected_welch_psd(p, d, s, sim.record_step(), sim.welch_segment));
  rep.zero_bin_analytic = spectrum_S_Yout(p, d, s, 0.0).S_Yout;
  return rep;
}

PsdEstimate simulate_closed_loop(const SystemParams& p, const DerivedParams& d,
                                 const MeanFieldState& s, const LoopFilter& filter,
                                 double bare_psd, const SimConfig& sim, bool precheck) {
  require_stable(s);
  check_sim_config(p, d, s, sim);
  if (!(bare_psd >= 0.0)) throw Error(ErrorCode::ConfigError, "bare detuning PSD must be >= 0");
  if (precheck && closed_loop_rhp_poles(p, d, s, filter) != 0) {
    throw Error(ErrorCode::UnstableLoop, "servo loop fails the Nyquist test");
  }
  const YSector ys = y_sector(p, d, s);

  // Open-loop stationary spread, the reference scale for divergence.
  const Eigen::Matrix2d A = ys.A;
  Eigen::Matrix4d K4 = Eigen::kroneckerProduct(Eigen::Matrix2d::Identity(), A) +
                       Eigen::kroneckerProduct(A, Eigen::Matrix2d::Identity());
  Eigen::Vector4d rhs(-ys.atom_noise * ys.atom_noise, 0.0, 0.0, -ys.input_noise * ys.input_noise);
  const Eigen::Vector4d P = K4.fullPivLu().solve(rhs);
  const double lim_sx = 1e6 * std::sqrt(std::max(P(0), 1e-300));
  const double lim_y = 1e6 * std::sqrt(std::max(P(3), 1e-300));

  const double dt = sim.dt;
  const int stride = sim.record_stride;
  const double slow = std::min(slowest_rate(p, d, s), filter.corner > 0.0 ? filter.corner : 1e300);
  const double transient = 20.0 / slow;
  const auto n_skip = static_cast<std::size_t>(std::ceil(transient / sim.record_step()));
  const auto n_rec =
      static_cast<std::size_t>(std::floor((sim.duration - transient) / sim.record_step()));
  if (sim.duration <= transient || n_rec < 2) {
    throw Error(ErrorCode::ConfigError, "duration leaves no samples after the transient");
  }

  const double sqrt_dt = std::sqrt(dt);
  const double bare_sd = std::sqrt(bare_psd / dt);
  const double sqrt_kappa = std::sqrt(p.kappa);

  std::vector<std::vector<double>> records(static_cast<std::size_t>(sim.n_trajectories));
  run_parallel(sim.n_trajectories, [&](int traj) {
    auto rng = stream(sim.seed, traj, 2);
    std::normal_distribution<double> normal;
    auto& rec = records[static_cast<std::size_t>(traj)];
    rec.resize(n_rec);
    double sx = 0.0, y = 0.0, integ = 0.0;
    for (std::size_t b = 0; b < n_skip + n_rec; ++b) {
      double acc = 0.0;
      for (int i = 0; i < stride; ++i) {
        const double dw_in = sqrt_dt * normal(rng);
        const double dw_at = sqrt_dt * normal(rng);
        const double bare = bare_sd * normal(rng);
        const double y_out = dw_in / (2.0 * dt) - sqrt_kappa * y;
        integ += y_out * dt;
        const double delta = bare - filter.gain * (y_out + filter.corner * integ);
        const double sx_next =
            sx + (A(0, 0) * sx + A(0, 1) * y + ys.drive * delta) * dt + ys.atom_noise * dw_at;
        y += (A(1, 0) * sx + A(1, 1) * y) * dt + ys.input_noise * dw_in;
        sx = sx_next;
        acc += delta;
        if (!(std::abs(sx) < lim_sx) || !(std::abs(y) < lim_y)) {
          throw Error(ErrorCode::UnstableLoop, "closed-loop state diverged");
        }
      }
      if (b >= n_skip) rec[b - n_skip] = acc / stride;
    }
  });
  return welch(records, sim.record_step(), sim.welch_segment, 1.0);
}

BandLevel band_level(const PsdEstimate& est, double omega_max) {
  BandLevel b;
  double var = 0.0;
  for (std::size_t k = 1; k < est.omega.size() && est.omega[k] <= omega_max; ++k) {
    b.mean += est.psd[k];
    var += est.stderr_[k] * est.stderr_[k];
    ++b.bins;
  }
  if (b.bins == 0) throw Error(ErrorCode::TooShort, "no frequency bins inside the requested band");
  const double n = static_cast<double>(b.bins);
  b.mean /= n;
  b.stderr_ = std::sqrt(var) / n;
  return b;
}

void write_trajectory(const std::string& path, const TimeSeries& ts, const SimConfig& sim) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  const std::vector<std::pair<std::string, const std::vector<double>*>> cols = {
      {"t", &ts.t},   {"sx", &ts.sx},     {"y", &ts.y},         {"x", &ts.x},
      {"s_perp", &ts.s_perp}, {"y_in", &ts.y_in}, {"y_out", &ts.y_out}};
  nlohmann::json header;
  header["fields"] = nlohmann::json::array();
  for (const auto& c : cols) header["fields"].push_back(c.first);
  header["dt"] = sim.dt;
  header["record_step"] = ts.record_step;
  header["seed"] = sim.seed;
  header["samples"] = ts.t.size();
  header["dtype"] = "float64";
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(len));
  for (const auto& c : cols) {
    out.write(reinterpret_cast<const char*>(c.second->data()),
              static_cast<std::streamsize>(c.second->size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

TimeSeries read_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  char magic[8];
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || len > (1u << 20)) {
    throw Error(ErrorCode::ParseError, path + " is not a trajectory dump");
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad trajectory header: ") + e.what());
  }
  TimeSeries ts;
  ts.record_step = header.at("record_step").get<double>();
  const auto n = header.at("samples").get<std::size_t>();
  for (const auto& name : header.at("fields")) {
    const std::string key = name.get<std::string>();
    std::vector<double>* dst = key == "t"        ? &ts.t
                               : key == "sx"     ? &ts.sx
                               : key == "y"      ? &ts.y
                               : key == "x"      ? &ts.x
                               : key == "s_perp" ? &ts.s_perp
                               : key == "y_in"   ? &ts.y_in
                               : key == "y_out"  ? &ts.y_out
                                                 : nullptr;
    std::vector<double> col(n);
    in.read(reinterpret_cast<char*>(col.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (dst) *dst = std::move(col);
  }
  if (!in) throw Error(ErrorCode::ParseError, path + " is truncated");
  return ts;
}

void write_psd_csv(const std::string& path, const PsdEstimate& est) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << "omega_rad_s,psd,stderr\n" << std::setprecision(17);
  for (std::size_t k = 0; k < est.omega.size(); ++k) {
    out << est.omega[k] << ',' << est.psd[k] << ',' << est.stderr_[k] << '\n';
  }
}

}  // namespace cavlock
