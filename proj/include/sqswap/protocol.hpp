#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "sqswap/evolution.hpp"
#include "sqswap/numerics.hpp"
#include "sqswap/operators.hpp"

namespace sqswap {

inline constexpr double kSlopeFloor = 1e-12;

struct SensitivityReport {
  double var_theta_A = 0.0;
  double var_theta_B = 0.0;
  double cov_AB = 0.0;
  double slope_A = 0.0;
  double slope_B = 0.0;
  double var_diff = 0.0;
  double gain = 0.0;
  double sql = 0.0;
};

inline double sql_variance(int n_atoms) { return 4.0 / n_atoms; }

/// Fringe of a pair measured after exp(-i theta J_y): given input means
/// z = <J_z>, x = <J_x>, the output mean is z cos(theta) - x sin(theta).
inline double fringe_mean(double z, double x, double theta) {
  return z * std::cos(theta) - x * std::sin(theta);
}
inline double fringe_slope(double z, double x, double theta) {
  return -z * std::sin(theta) - x * std::cos(theta);
}

/// Variance of v_A theta_A + v_B theta_B from output variances, covariance and slopes.
inline double linear_combination_variance(double var_a, double var_b, double cov, double slope_a,
                                          double slope_b, double v_a, double v_b) {
  if ((v_a != 0.0 && std::abs(slope_a) < kSlopeFloor) ||
      (v_b != 0.0 && std::abs(slope_b) < kSlopeFloor)) {
    throw DegenerateWorkingPoint("fringe slope vanishes at the requested working point");
  }
  double r = 0.0;
  if (v_a != 0.0) r += v_a * v_a * var_a / (slope_a * slope_a);
  if (v_b != 0.0) r += v_b * v_b * var_b / (slope_b * slope_b);
  if (v_a != 0.0 && v_b != 0.0) r += 2.0 * v_a * v_b * cov / (slope_a * slope_b);
  return r;
}

/// Means and symmetrized covariance of (J_z^{ab}, J_x^{ab}, J_z^{cd}, J_x^{cd})
/// on the input-port state. The phase encoding is a rotation in each pair,
/// so every output moment at any (theta_A, theta_B) follows exactly.
struct InputMoments {
  enum : int { zA = 0, xA = 1, zB = 2, xB = 3 };
  int atoms = 0;
  std::array<double, 4> mean{};
  std::array<std::array<double, 4>, 4> cov{};

  // One pass over the lexicographic basis; J_x images are gathered per
  // index so nothing of state size is allocated.
  static InputMoments from_state(const StateVector& s) {
    const FockBasis& b = s.basis();
    const int N = b.atoms();
    double acc[4] = {0, 0, 0, 0};
    double sec[4][4] = {};
    std::size_t i = 0;
    for (int na = 0; na <= N; ++na) {
      for (int nb = 0; nb <= N - na; ++nb) {
        for (int nc = 0; nc <= N - na - nb; ++nc, ++i) {
          const int nd = N - na - nb - nc;
          const cplx psi = s[i];
          cplx xa(0.0, 0.0), xb(0.0, 0.0);
          if (na > 0) xa += 0.5 * std::sqrt(na * (nb + 1.0)) * s[b.index_unchecked(na - 1, nb + 1, nc)];
          if (nb > 0) xa += 0.5 * std::sqrt((na + 1.0) * nb) * s[b.index_unchecked(na + 1, nb - 1, nc)];
          if (nc > 0) xb += 0.5 * std::sqrt(nc * (nd + 1.0)) * s[i - 1];
          if (nd > 0) xb += 0.5 * std::sqrt((nc + 1.0) * nd) * s[i + 1];
          const double p = std::norm(psi);
          const double za = 0.5 * (na - nb), zb = 0.5 * (nc - nd);
          const cplx v[4] = {za * psi, xa, zb * psi, xb};
          acc[0] += p * za;
          acc[1] += (std::conj(psi) * xa).real();
          acc[2] += p * zb;
          acc[3] += (std::conj(psi) * xb).real();
          for (int r = 0; r < 4; ++r) {
            for (int c = r; c < 4; ++c) sec[r][c] += (std::conj(v[r]) * v[c]).real();
          }
        }
      }
    }
    InputMoments m;
    m.atoms = N;
    for (int r = 0; r < 4; ++r) m.mean[r] = acc[r];
    for (int r = 0; r < 4; ++r) {
      for (int c = r; c < 4; ++c) m.cov[r][c] = m.cov[c][r] = sec[r][c] - acc[r] * acc[c];
    }
    return m;
  }

  double slope_A(double th) const { return fringe_slope(mean[zA], mean[xA], th); }
  double slope_B(double th) const { return fringe_slope(mean[zB], mean[xB], th); }

  // Output J_z = cos(th) J_z - sin(th) J_x, i.e. weights (c, -s) on (z, x).
  double out_cov(int z1, double t1, int z2, double t2) const {
    const double w1[2] = {std::cos(t1), -std::sin(t1)};
    const double w2[2] = {std::cos(t2), -std::sin(t2)};
    double r = 0.0;
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) r += w1[i] * w2[j] * cov[z1 + i][z2 + j];
    }
    return r;
  }
  double out_var_A(double ta) const { return out_cov(zA, ta, zA, ta); }
  double out_var_B(double tb) const { return out_cov(zB, tb, zB, tb); }
  double out_cov_AB(double ta, double tb) const { return out_cov(zA, ta, zB, tb); }

  double var_linear(double ta, double tb, double va, double vb) const {
    return linear_combination_variance(out_var_A(ta), out_var_B(tb), out_cov_AB(ta, tb), slope_A(ta),
                                       slope_B(tb), va, vb);
  }
  double var_diff(double ta, double tb) const { return var_linear(ta, tb, 1.0, -1.0); }
  double gain(double ta, double tb) const { return sql_variance(atoms) / var_diff(ta, tb); }

  SensitivityReport report(double ta, double tb) const {
    SensitivityReport r;
    r.slope_A = slope_A(ta);
    r.slope_B = slope_B(tb);
    r.cov_AB = out_cov_AB(ta, tb);
    r.var_theta_A = var_linear(ta, tb, 1.0, 0.0);
    r.var_theta_B = var_linear(ta, tb, 0.0, 1.0);
    r.var_diff = var_diff(ta, tb);
    r.sql = sql_variance(atoms);
    r.gain = r.sql / r.var_diff;
    return r;
  }
};

/// Input-port state of the mode-swapped protocol (before phase encoding).
inline StateVector prepare_input_state(const ProtocolConfig& cfg, const BasisPtr& basis) {
  cfg.validate();
  StateVector s = prepare_initial(basis);
  s = evolve_squeezing(s, cfg.generator, cfg.tau_E, cfg.nu_E);
  return apply_mode_swap(s, cfg.theta_MS, cfg.phi_MS);
}

inline StateVector prepare_input_state(const ProtocolConfig& cfg) {
  return prepare_input_state(cfg, build_basis(cfg.n_atoms));
}

struct MepeResult {
  StateVector input;
  StateVector output;
  SensitivityReport report;
};

/// Full pipeline: initial split, squeezing, mode swap, phase encoding.
/// Output variances and covariance come from the evolved output state;
/// slopes come from the input-port means through the fringe law.
inline MepeResult run_mepe(const ProtocolConfig& cfg, const BasisPtr& basis) {
  StateVector in = prepare_input_state(cfg, basis);
  StateVector out = encode_phases(in, cfg.theta_A, cfg.theta_B);
  const MomentTable inp = moments(in, std::vector<PairComponent>{{Pair::ab, Axis::z},
                                                               {Pair::ab, Axis::x},
                                                               {Pair::cd, Axis::z},
                                                               {Pair::cd, Axis::x}});
  const MomentTable o =
      moments(out, std::vector<PairComponent>{{Pair::ab, Axis::z}, {Pair::cd, Axis::z}});
  SensitivityReport r;
  r.slope_A = fringe_slope(inp.mean[0], inp.mean[1], cfg.theta_A);
  r.slope_B = fringe_slope(inp.mean[2], inp.mean[3], cfg.theta_B);
  r.cov_AB = o.cov[0][1];
  r.var_theta_A = linear_combination_variance(o.var(0), o.var(1), r.cov_AB, r.slope_A, r.slope_B, 1, 0);
  r.var_theta_B = linear_combination_variance(o.var(0), o.var(1), r.cov_AB, r.slope_A, r.slope_B, 0, 1);
  r.var_diff = linear_combination_variance(o.var(0), o.var(1), r.cov_AB, r.slope_A, r.slope_B, 1, -1);
  r.sql = sql_variance(cfg.n_atoms);
  r.gain = r.sql / r.var_diff;
  return {std::move(in), std::move(out), r};
}

inline MepeResult run_mepe(const ProtocolConfig& cfg) {
  return run_mepe(cfg, build_basis(cfg.n_atoms));
}

/// Variance of v_A theta_A + v_B theta_B estimated on `state_inp`, using
/// moments of the explicitly phase-encoded output state.
inline double sensitivity_linear_combination(const StateVector& state_inp, double theta_a,
                                             double theta_b, double v_a, double v_b) {
  const MomentTable inp = moments(state_inp, std::vector<PairComponent>{{Pair::ab, Axis::z},
                                                                      {Pair::ab, Axis::x},
                                                                      {Pair::cd, Axis::z},
                                                                      {Pair::cd, Axis::x}});
  const double sa = fringe_slope(inp.mean[0], inp.mean[1], theta_a);
  const double sb = fringe_slope(inp.mean[2], inp.mean[3], theta_b);
  const StateVector out = encode_phases(state_inp, theta_a, theta_b);
  const MomentTable o =
      moments(out, std::vector<PairComponent>{{Pair::ab, Axis::z}, {Pair::cd, Axis::z}});
  return linear_combination_variance(o.var(0), o.var(1), o.cov[0][1], sa, sb, v_a, v_b);
}

/// Mid-fringe form: Var(J_x^{ab}/<J_z^{ab}> - J_x^{cd}/<J_z^{cd}>) on the input state.
inline double midfringe_sensitivity(const StateVector& state_inp) {
  const MomentTable t = moments(state_inp, std::vector<PairComponent>{{Pair::ab, Axis::z},
                                                                    {Pair::ab, Axis::x},
                                                                    {Pair::cd, Axis::z},
                                                                    {Pair::cd, Axis::x}});
  const double za = t.mean[0];
  const double zb = t.mean[2];
  if (std::abs(za) < kSlopeFloor || std::abs(zb) < kSlopeFloor) {
    throw DegenerateWorkingPoint("vanishing <J_z> at the input ports");
  }
  return t.cov[1][1] / (za * za) + t.cov[3][3] / (zb * zb) - 2.0 * t.cov[1][3] / (za * zb);
}

// ---------------------------------------------------------------------------
// Mode-separable reference: two independent two-mode interferometers.

/// Moments of a two-mode (single pair) state of n atoms, k = atoms in the up mode.
struct TwoModeMoments {
  double z = 0.0, x = 0.0;
  double var_z = 0.0, var_x = 0.0, cov_zx = 0.0;

  double out_var(double th) const {
    const double c = std::cos(th), s = std::sin(th);
    return c * c * var_z + s * s * var_x - 2.0 * c * s * cov_zx;
  }
  double slope(double th) const { return fringe_slope(z, x, th); }
  double phase_variance(double th) const {
    const double d = slope(th);
    if (std::abs(d) < kSlopeFloor) throw DegenerateWorkingPoint("fringe slope vanishes");
    return out_var(th) / (d * d);
  }
};

/// Squeezed (n)-atom pair: all atoms in the up mode, squeezing, then J_z rotation.
inline Eigen::VectorXcd squeezed_pair_state(int n, Generator g, double tau, double nu) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n + 1);
  v[n] = 1.0;
  if (tau != 0.0) v = (g == Generator::oat ? sector_oat(n, tau) : sector_tat(n, tau)) * v;
  for (int k = 0; k <= n; ++k) v[k] *= std::polar(1.0, -nu * detail::spin_m(k, n));
  return v;
}

inline TwoModeMoments two_mode_moments(const Eigen::VectorXcd& v) {
  const int n = static_cast<int>(v.size()) - 1;
  Eigen::VectorXcd jz(n + 1), jx = Eigen::VectorXcd::Zero(n + 1);
  for (int k = 0; k <= n; ++k) {
    jz[k] = detail::spin_m(k, n) * v[k];
    if (k < n) {
      const double e = 0.5 * std::sqrt((k + 1.0) * (n - k));
      jx[k + 1] += e * v[k];
      jx[k] += e * v[k + 1];
    }
  }
  TwoModeMoments m;
  m.z = v.dot(jz).real();
  m.x = v.dot(jx).real();
  m.var_z = jz.squaredNorm() - m.z * m.z;
  m.var_x = jx.squaredNorm() - m.x * m.x;
  m.cov_zx = jz.dot(jx).real() - m.z * m.x;
  return m;
}

/// Wineland parameter of a pair in the four-mode state:
/// (N/2) * min transverse variance / <J_z>^2, transverse = (J_x, J_y) plane.
inline double spin_squeezing_parameter(const StateVector& s, Pair pair = Pair::ab) {
  const FockBasis& b = s.basis();
  const MomentTable t = moments(s, std::vector<PairOperator>{pair_spin_operator(b, pair, Axis::x),
                                                           pair_spin_operator(b, pair, Axis::y),
                                                           pair_spin_operator(b, pair, Axis::z)});
  const double cxx = t.cov[0][0], cyy = t.cov[1][1], cxy = t.cov[0][1];
  const double vmin = 0.5 * (cxx + cyy) - std::sqrt(0.25 * (cxx - cyy) * (cxx - cyy) + cxy * cxy);
  return 0.5 * b.atoms() * vmin / (t.mean[2] * t.mean[2]);
}

enum class SplitStatistics {
  binomial,  // atom number per interferometer from the balanced split of N
  fixed      // exactly N/2 atoms per interferometer
};

/// One squeezed pair with a distribution over its atom number. Pair
/// observables conserve the number, so moments are weighted sums over
/// fixed-number states.
class PairEnsemble {
 public:
  PairEnsemble(int n_total, SplitStatistics split, Generator g, double tau) {
    if (split == SplitStatistics::fixed) {
      add(n_total / 2, 1.0, g, tau);
      return;
    }
    for (int n = 1; n <= n_total; ++n) {
      const double lw = std::lgamma(n_total + 1.0) - std::lgamma(n + 1.0) -
                        std::lgamma(n_total - n + 1.0) - n_total * std::log(2.0);
      add(n, std::exp(lw), g, tau);
    }
  }

  TwoModeMoments moments(double nu) const {
    double z = 0, x = 0, zz = 0, xx = 0, zx = 0;
    for (std::size_t i = 0; i < base_.size(); ++i) {
      const int n = static_cast<int>(base_[i].size()) - 1;
      Eigen::VectorXcd v = base_[i];
      if (nu != 0.0) {
        for (int k = 0; k <= n; ++k) v[k] *= std::polar(1.0, -nu * detail::spin_m(k, n));
      }
      const TwoModeMoments m = two_mode_moments(v);
      const double w = weights_[i];
      z += w * m.z, x += w * m.x;
      zz += w * (m.var_z + m.z * m.z);
      xx += w * (m.var_x + m.x * m.x);
      zx += w * (m.cov_zx + m.z * m.x);
    }
    return {z, x, zz - z * z, xx - x * x, zx - z * x};
  }

 private:
  void add(int n, double w, Generator g, double tau) {
    if (n < 1 || w == 0.0) return;
    weights_.push_back(w);
    base_.push_back(squeezed_pair_state(n, g, tau, 0.0));
  }

  std::vector<double> weights_;
  std::vector<Eigen::VectorXcd> base_;
};

struct SeparableResult {
  TwoModeMoments A, B;
  SensitivityReport report;
};

/// Two independent squeezed interferometers sharing N atoms, no mode swap.
/// With binomial statistics this coincides with the four-mode protocol at
/// theta_MS = 0, tau_S_B = 0.
inline SeparableResult run_separable_detail(const ProtocolConfig& cfg,
                                            SplitStatistics split = SplitStatistics::binomial) {
  cfg.validate();
  if (cfg.n_atoms % 2 != 0) throw InvalidSplit("mode-separable reference needs even N");
  SeparableResult res;
  res.A = PairEnsemble(cfg.n_atoms, split, cfg.generator, cfg.tau_S_A).moments(cfg.nu_E);
  res.B = PairEnsemble(cfg.n_atoms, split, cfg.generator, cfg.tau_S_B).moments(cfg.nu_E);
  auto& r = res.report;
  r.slope_A = res.A.slope(cfg.theta_A);
  r.slope_B = res.B.slope(cfg.theta_B);
  r.cov_AB = 0.0;
  r.var_theta_A = res.A.phase_variance(cfg.theta_A);
  r.var_theta_B = res.B.phase_variance(cfg.theta_B);
  r.var_diff = r.var_theta_A + r.var_theta_B;
  r.sql = sql_variance(cfg.n_atoms);
  r.gain = r.sql / r.var_diff;
  return res;
}

inline SensitivityReport run_separable(const ProtocolConfig& cfg,
                                       SplitStatistics split = SplitStatistics::binomial) {
  return run_separable_detail(cfg, split).report;
}

/// Rotation nu minimizing the mid-fringe phase variance of a squeezed pair.
/// The variance is pi-periodic in nu.
inline double best_pair_rotation(const PairEnsemble& ens, int grid = 720) {
  auto cost = [&](double nu) {
    try {
      return ens.moments(nu).phase_variance(kPi / 2);
    } catch (const DegenerateWorkingPoint&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  double best = 0.0, best_c = cost(0.0);
  for (int i = 1; i < grid; ++i) {
    const double nu = kPi * i / grid;
    const double c = cost(nu);
    if (c < best_c) best_c = c, best = nu;
  }
  // polish inside one grid step
  return golden_section_min(cost, best - kPi / grid, best + kPi / grid, 1e-9).first;
}

// ---------------------------------------------------------------------------
// Fast input-state builder for scans over (nu_E, phi_MS) at fixed squeezing.
//
// After squeezing, mode c is empty, so each (b,c) sector with n_b + n_c = s
// holds the single vector |k = s>. The mode swap then maps it onto column s
// of the sector matrix, and the J_z^{ab} rotation is a diagonal phase.

class SwapScanner {
 public:
  SwapScanner(const BasisPtr& basis, Generator g, double tau)
      : basis_(basis), squeezed_(evolve_squeezing(prepare_initial(basis), g, tau, 0.0)) {}

  const StateVector& squeezed() const { return squeezed_; }
  const BasisPtr& basis() const { return basis_; }

  StateVector input_state(double nu, double theta_ms, double phi_ms) const {
    const FockBasis& b = *basis_;
    const int N = b.atoms();
    const auto& cols = swap_columns(theta_ms);
    StateVector out(basis_);
    for (int na = 0; na <= N; ++na) {
      for (int s = 0; s <= N - na; ++s) {
        const cplx src = squeezed_[b.index_unchecked(na, s, 0)];
        if (src == cplx(0.0, 0.0)) continue;
        // rotation acts before the swap, while n_b = s
        const cplx rot = std::polar(1.0, -nu * 0.5 * (na - s)) * src;
        for (int nb = 0; nb <= s; ++nb) {
          const cplx w = cols[s][nb] * std::polar(1.0, -phi_ms * (nb - s));
          out[b.index_unchecked(na, nb, s - nb)] = rot * w;
        }
      }
    }
    return out;
  }

  InputMoments moments_at(double nu, double theta_ms, double phi_ms) const {
    return InputMoments::from_state(input_state(nu, theta_ms, phi_ms));
  }

  double midfringe_gain(double nu, double theta_ms, double phi_ms) const {
    return moments_at(nu, theta_ms, phi_ms).gain(kPi / 2, kPi / 2);
  }

 private:
  // Column s of exp(-i theta J_x) on every sector, cached for the last theta.
  const std::vector<std::vector<cplx>>& swap_columns(double theta) const {
    std::lock_guard lock(mu_);
    if (!cols_.empty() && cols_theta_ == theta) return cols_;
    const int N = basis_->atoms();
    cols_.assign(static_cast<std::size_t>(N) + 1, {});
    for (int s = 0; s <= N; ++s) {
      const Eigen::MatrixXcd m = sector_rotation_x(s, theta);
      cols_[s].assign(m.col(s).data(), m.col(s).data() + s + 1);
    }
    cols_theta_ = theta;
    return cols_;
  }

  BasisPtr basis_;
  StateVector squeezed_;
  mutable std::mutex mu_;
  mutable std::vector<std::vector<cplx>> cols_;
  mutable double cols_theta_ = 0.0;
};

// ---------------------------------------------------------------------------
// Bandwidth and average gain.

/// Fraction of the open midpoint grid over [0, pi]^2 with G^2 > 1.
template <class GainFn>
double bandwidth_of(GainFn&& gain, int resolution) {
  if (resolution < 32) throw InvalidArgument("bandwidth grid resolution must be >= 32");
  std::size_t hits = 0;
  for (int i = 0; i < resolution; ++i) {
    const double ta = (i + 0.5) * kPi / resolution;
    for (int j = 0; j < resolution; ++j) {
      const double tb = (j + 0.5) * kPi / resolution;
      double g = 0.0;
      try {
        g = gain(ta, tb);
      } catch (const DegenerateWorkingPoint&) {
        g = 0.0;
      }
      if (g > 1.0 + 1e-9) ++hits;
    }
  }
  return static_cast<double>(hits) / (static_cast<double>(resolution) * resolution);
}

inline double bandwidth(const InputMoments& m, int resolution) {
  return bandwidth_of([&m](double a, double b) { return m.gain(a, b); }, resolution);
}

inline double bandwidth(const ProtocolConfig& cfg, int resolution) {
  if (resolution < 32) throw InvalidArgument("bandwidth grid resolution must be >= 32");
  return bandwidth(InputMoments::from_state(prepare_input_state(cfg)), resolution);
}

/// Mean of gain(pi/2 + p, pi/2 + p) over p in [-L, L] by composite Simpson.
template <class GainFn>
double average_gain_of(GainFn&& gain, double lambda, int n_points) {
  if (!(lambda > 0.0) || lambda > kPi / 2) throw InvalidArgument("Lambda must lie in (0, pi/2]");
  int m = std::max(n_points, 3);
  if (m % 2 == 0) ++m;  // odd number of nodes
  const double h = 2.0 * lambda / (m - 1);
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    const double p = -lambda + i * h;
    const double w = (i == 0 || i == m - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    double g = 0.0;
    try {
      g = gain(kPi / 2 + p, kPi / 2 + p);
    } catch (const DegenerateWorkingPoint&) {
      g = 0.0;
    }
    acc += w * g;
  }
  return acc * h / 3.0 / (2.0 * lambda);
}

inline double average_gain(const InputMoments& m, double lambda, int n_points) {
  return average_gain_of([&m](double a, double b) { return m.gain(a, b); }, lambda, n_points);
}

inline double average_gain(const ProtocolConfig& cfg, double lambda, int n_points) {
  return average_gain(InputMoments::from_state(prepare_input_state(cfg)), lambda, n_points);
}

}  // namespace sqswap
