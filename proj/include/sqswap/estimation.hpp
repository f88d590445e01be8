#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "sqswap/evolution.hpp"
#include "sqswap/parallel.hpp"
#include "sqswap/protocol.hpp"

namespace sqswap {

struct NoiseConfig {
  double sigma_pn = 0.0;   // common phase-noise width (rad)
  double Lambda_pn = 0.1;  // box half-width for the average gain (rad)
  double gamma_LO = 1.0;   // LO decoherence rate
  double T = 1e-3;         // Ramsey time
  double T_tot = 1.0;      // total effective interrogation time
  double omega_0 = 1.0;
  double omega_A = 1.0;
  double omega_B = 1.0;
  std::size_t shots = 100000;
  std::uint64_t seed = 42;

  void validate() const {
    if (!(sigma_pn >= 0.0)) throw InvalidArgument("sigma_pn must be >= 0");
    if (shots < 1) throw InvalidArgument("shots must be >= 1");
    if (!(T > 0.0) || !(T_tot > 0.0)) throw InvalidArgument("T and T_tot must be > 0");
  }
};

struct EstimateRecord {
  Occupation outcome{};
  double mu_A = 0.0;
  double mu_B = 0.0;
  double theta_est_A = 0.0;
  double theta_est_B = 0.0;
};

// ---------------------------------------------------------------------------
// Sampling.

/// Walker/Vose alias table over indices [0, n).
class AliasTable {
 public:
  explicit AliasTable(const std::vector<double>& p) {
    const std::size_t n = p.size();
    if (n == 0) throw NonNormalizedDistribution("empty distribution");
    double total = 0.0;
    for (double x : p) {
      if (!(x >= 0.0) || !std::isfinite(x)) throw NonNormalizedDistribution("negative or non-finite probability");
      total += x;
    }
    if (std::abs(total - 1.0) > 1e-8) {
      throw NonNormalizedDistribution("probabilities sum to " + std::to_string(total));
    }
    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = p[i] / total * static_cast<double>(n);
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back(), l = large.back();
      small.pop_back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (std::size_t i : large) prob_[i] = 1.0;
    for (std::size_t i : small) prob_[i] = 1.0;
  }

  template <class Rng>
  std::size_t operator()(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng) * static_cast<double>(prob_.size());
    auto i = static_cast<std::size_t>(x);
    if (i >= prob_.size()) i = prob_.size() - 1;
    return (x - static_cast<double>(i)) < prob_[i] ? i : alias_[i];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

namespace detail {
inline constexpr std::size_t kShotBlock = 1024;

/// Independent engine per block of shots so results do not depend on the
/// number of workers.
inline std::mt19937_64 block_engine(std::uint64_t seed, std::size_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
  return std::mt19937_64(seq);
}

template <class Fn>
void for_each_shot_block(std::size_t shots, Fn&& fn) {
  const std::size_t blocks = (shots + kShotBlock - 1) / kShotBlock;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t lo = b * kShotBlock;
    fn(b, lo, std::min(shots, lo + kShotBlock));
  });
}

/// Index of a draw from unnormalized weights (linear CDF inversion).
template <class Rng>
std::size_t draw_weighted(const std::vector<double>& w, double total, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double t = u(rng) * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    t -= w[i];
    if (t < 0.0) return i;
  }
  // round-off: last index with nonzero weight
  for (std::size_t i = w.size(); i-- > 0;) {
    if (w[i] > 0.0) return i;
  }
  return 0;
}
}  // namespace detail

inline std::vector<Occupation> sample_shots(const OutcomeDistribution& dist, std::size_t shots,
                                            std::uint64_t seed) {
  const AliasTable table(dist.probabilities);
  std::vector<Occupation> out(shots);
  detail::for_each_shot_block(shots, [&](std::size_t b, std::size_t lo, std::size_t hi) {
    auto rng = detail::block_engine(seed, b);
    for (std::size_t i = lo; i < hi; ++i) out[i] = dist.basis->state(table(rng));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Method-of-moments inversion.

/// Input-port fringe parameters of both interferometers.
struct FringeMoments {
  double z_A = 0.0, x_A = 0.0, z_B = 0.0, x_B = 0.0;

  static FringeMoments from(const InputMoments& m) {
    return {m.mean[InputMoments::zA], m.mean[InputMoments::xA], m.mean[InputMoments::zB],
            m.mean[InputMoments::xB]};
  }
};

/// Solves mu = z cos(theta) - x sin(theta) on the monotonic half-period
/// closest to mid-fringe. mu beyond the fringe amplitude is clamped.
inline double invert_fringe(double mu, double z, double x) {
  const double amp = std::hypot(z, x);
  if (amp < 1e-12) throw ZeroFringeAmplitude("fringe amplitude vanishes");
  const double beta = std::atan2(x, z);
  // monotonic intervals [-beta + k pi, -beta + (k+1) pi], centers -beta + (k + 1/2) pi
  const double k = std::round((kPi / 2 + beta) / kPi - 0.5);
  const double sign = (static_cast<long long>(k) % 2 == 0) ? 1.0 : -1.0;
  const double c = std::clamp(sign * mu / amp, -1.0, 1.0);
  return -beta + k * kPi + std::acos(c);
}

inline std::pair<double, double> invert_phases(double mu_a, double mu_b, const FringeMoments& m) {
  return {invert_fringe(mu_a, m.z_A, m.x_A), invert_fringe(mu_b, m.z_B, m.x_B)};
}

inline EstimateRecord estimate_from_outcome(const Occupation& o, const FringeMoments& m) {
  EstimateRecord r;
  r.outcome = o;
  r.mu_A = 0.5 * (o[0] - o[1]);
  r.mu_B = 0.5 * (o[2] - o[3]);
  std::tie(r.theta_est_A, r.theta_est_B) = invert_phases(r.mu_A, r.mu_B, m);
  return r;
}

// ---------------------------------------------------------------------------
// Single-shot sampler at arbitrary phases.
//
// The encoding conserves n_A = n_a + n_b, so n_A is drawn from fixed block
// weights. Inside a block the amplitudes form a matrix M[k][l] (k = n_a,
// l = n_c) and the output block is d_A M d_B^T. Row norms of d_A M give the
// marginal of k (d_B is unitary); the chosen row times d_B^T gives l.

class ShotSampler {
 public:
  explicit ShotSampler(const StateVector& input) : basis_(input.basis_ptr()) {
    const FockBasis& b = *basis_;
    const int N = b.atoms();
    blocks_.resize(static_cast<std::size_t>(N) + 1);
    std::vector<double> w(static_cast<std::size_t>(N) + 1, 0.0);
    for (int na_tot = 0; na_tot <= N; ++na_tot) {
      const int nb_tot = N - na_tot;
      Block& blk = blocks_[na_tot];
      blk.m.resize(na_tot + 1, nb_tot + 1);
      for (int k = 0; k <= na_tot; ++k) {
        for (int l = 0; l <= nb_tot; ++l) blk.m(k, l) = input[b.index_unchecked(k, na_tot - k, l)];
      }
      w[na_tot] = blk.m.squaredNorm();
      // theta-independent part of d_A M: V^T P^* M, with d = P V E V^T P^*
      blk.pre = detail::jx_spectrum(na_tot).eigenvectors().transpose().cast<cplx>() *
                (phase_diag(na_tot).conjugate().asDiagonal() * blk.m);
    }
    double total = 0.0;
    for (double x : w) total += x;
    if (std::abs(total - 1.0) > detail::kNormError) throw NonNormalizedInput("ShotSampler: state not normalized");
    for (double& x : w) x /= total;
    weights_ = AliasTable(w);
  }

  template <class Rng>
  Occupation sample(double theta_a, double theta_b, Rng& rng) const {
    const int N = basis_->atoms();
    const auto na_tot = static_cast<int>(weights_(rng));
    const int nb_tot = N - na_tot;
    const Block& blk = blocks_[na_tot];
    // R = P V E_A (V^T P^* M)
    const auto& va = detail::jx_spectrum(na_tot);
    Eigen::MatrixXcd e_pre = blk.pre;
    for (int j = 0; j <= na_tot; ++j) e_pre.row(j) *= std::polar(1.0, -theta_a * va.eigenvalues()[j]);
    const Eigen::MatrixXcd r =
        phase_diag(na_tot).asDiagonal() * (va.eigenvectors().cast<cplx>() * e_pre);
    std::vector<double> wk(static_cast<std::size_t>(na_tot) + 1);
    double tk = 0.0;
    for (int k = 0; k <= na_tot; ++k) tk += (wk[k] = r.row(k).squaredNorm());
    const auto k = static_cast<int>(detail::draw_weighted(wk, tk, rng));
    // row * d_B^T, d_B^T = P^* V E V^T P
    const auto& vb = detail::jx_spectrum(nb_tot);
    const Eigen::VectorXcd pb = phase_diag(nb_tot);
    Eigen::RowVectorXcd row = r.row(k) * pb.conjugate().asDiagonal();
    row = row * vb.eigenvectors().cast<cplx>();
    for (int j = 0; j <= nb_tot; ++j) row[j] *= std::polar(1.0, -theta_b * vb.eigenvalues()[j]);
    row = row * vb.eigenvectors().transpose().cast<cplx>();
    row = row * pb.asDiagonal();
    std::vector<double> wl(static_cast<std::size_t>(nb_tot) + 1);
    double tl = 0.0;
    for (int l = 0; l <= nb_tot; ++l) tl += (wl[l] = std::norm(row[l]));
    const auto l = static_cast<int>(detail::draw_weighted(wl, tl, rng));
    return {k, na_tot - k, l, nb_tot - l};
  }

 private:
  struct Block {
    Eigen::MatrixXcd m;
    Eigen::MatrixXcd pre;
  };

  // diag(e^{-i pi/2 m_k}) of the J_y rotation
  static Eigen::VectorXcd phase_diag(int n) {
    Eigen::VectorXcd p(n + 1);
    for (int k = 0; k <= n; ++k) p[k] = std::polar(1.0, -kPi / 2 * detail::spin_m(k, n));
    return p;
  }

  BasisPtr basis_;
  std::vector<Block> blocks_;
  AliasTable weights_{std::vector<double>{1.0}};
};

// ---------------------------------------------------------------------------
// Experiments.

/// Streaming first and second moments of (theta_est_A, theta_est_B).
struct PairStats {
  double n = 0, sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;

  void add(double a, double b) {
    n += 1, sa += a, sb += b, saa += a * a, sbb += b * b, sab += a * b;
  }
  void merge(const PairStats& o) {
    n += o.n, sa += o.sa, sb += o.sb, saa += o.saa, sbb += o.sbb, sab += o.sab;
  }
  double mean_a() const { return sa / n; }
  double mean_b() const { return sb / n; }
  double var_a() const { return (saa - sa * sa / n) / (n - 1); }
  double var_b() const { return (sbb - sb * sb / n) / (n - 1); }
  double cov() const { return (sab - sa * sb / n) / (n - 1); }
  double var_diff() const { return var_a() + var_b() - 2 * cov(); }
  double var_sum() const { return var_a() + var_b() + 2 * cov(); }
};

struct Histogram2D {
  int bins = 0;
  double lo = 0.0, hi = kPi;
  std::vector<std::size_t> counts;  // row-major, index (i_A, i_B)

  void add(double a, double b) {
    auto bin = [&](double v) {
      const double t = (v - lo) / (hi - lo) * bins;
      return std::clamp(static_cast<int>(std::floor(t)), 0, bins - 1);
    };
    ++counts[static_cast<std::size_t>(bin(a)) * bins + bin(b)];
  }
};

struct DifferentialResult {
  double var_diff = 0.0;  // sample variance of theta_est_A - theta_est_B
  double mean_diff = 0.0;
  PairStats stats;
  Histogram2D histogram;
  std::vector<EstimateRecord> records;  // kept only when requested
};

struct DifferentialOptions {
  double phi_A = kPi / 2;
  double phi_B = kPi / 2;
  int histogram_bins = 64;
  bool keep_records = false;
};

/// Shots with a common Gaussian phase offset on both interferometers.
inline DifferentialResult differential_experiment(const StateVector& input, const NoiseConfig& noise,
                                                  const DifferentialOptions& o = {}) {
  noise.validate();
  const FringeMoments fm = FringeMoments::from(InputMoments::from_state(input));
  const std::size_t blocks = (noise.shots + detail::kShotBlock - 1) / detail::kShotBlock;
  std::vector<PairStats> stats(blocks);
  std::vector<EstimateRecord> records(o.keep_records ? noise.shots : 0);
  std::vector<std::pair<double, double>> est(noise.shots);

  if (noise.sigma_pn == 0.0) {
    const StateVector out = encode_phases(input, o.phi_A, o.phi_B);
    const auto shots = sample_shots(outcome_distribution(out), noise.shots, noise.seed);
    for (std::size_t i = 0; i < shots.size(); ++i) {
      const auto r = estimate_from_outcome(shots[i], fm);
      est[i] = {r.theta_est_A, r.theta_est_B};
      if (o.keep_records) records[i] = r;
    }
  } else {
    const ShotSampler sampler(input);
    detail::for_each_shot_block(noise.shots, [&](std::size_t b, std::size_t lo, std::size_t hi) {
      auto rng = detail::block_engine(noise.seed, b);
      std::normal_distribution<double> pn(0.0, noise.sigma_pn);
      for (std::size_t i = lo; i < hi; ++i) {
        const double common = pn(rng);
        const auto r = estimate_from_outcome(sampler.sample(o.phi_A + common, o.phi_B + common, rng), fm);
        est[i] = {r.theta_est_A, r.theta_est_B};
        if (o.keep_records) records[i] = r;
      }
    });
  }

  DifferentialResult res;
  res.histogram.bins = o.histogram_bins;
  res.histogram.counts.assign(static_cast<std::size_t>(o.histogram_bins) * o.histogram_bins, 0);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t lo = b * detail::kShotBlock, hi = std::min(noise.shots, lo + detail::kShotBlock);
    for (std::size_t i = lo; i < hi; ++i) stats[b].add(est[i].first, est[i].second);
    res.stats.merge(stats[b]);
  }
  for (const auto& e : est) res.histogram.add(e.first, e.second);
  res.var_diff = res.stats.var_diff();
  res.mean_diff = res.stats.mean_a() - res.stats.mean_b();
  res.records = std::move(records);
  return res;
}

inline DifferentialResult differential_experiment(const ProtocolConfig& cfg, const NoiseConfig& noise,
                                                  bool keep_records = false) {
  DifferentialOptions o;
  o.phi_A = cfg.theta_A;
  o.phi_B = cfg.theta_B;
  o.keep_records = keep_records;
  return differential_experiment(prepare_input_state(cfg), noise, o);
}

struct ClockPoint {
  double T = 0.0;
  double cycles = 0.0;           // T_tot / T
  double var_phase_diff = 0.0;   // per-cycle variance of the phase-difference estimate
  double var_fractional = 0.0;   // variance of (omega_A - omega_B)/omega_0 after averaging
  double mean_fractional = 0.0;
  double sql_reference = 0.0;    // 4 / (omega_0^2 N T T_tot)
};

/// Differential Ramsey comparison. Each cycle draws a common LO phase with
/// standard deviation gamma_LO T; the estimated phase difference is turned
/// into a fractional frequency difference and averaged over T_tot / T
/// independent cycles (variance divided by the cycle count).
inline std::vector<ClockPoint> clock_experiment(const StateVector& input, const NoiseConfig& noise,
                                                const std::vector<double>& times) {
  if (!(noise.omega_0 > 0.0)) throw InvalidArgument("omega_0 must be > 0");
  const int n = input.basis().atoms();
  std::vector<ClockPoint> out;
  std::size_t idx = 0;
  for (double T : times) {
    NoiseConfig nc = noise;
    nc.T = T;
    nc.validate();
    nc.sigma_pn = noise.gamma_LO * T;
    nc.seed = noise.seed + 0x9e3779b97f4a7c15ULL * (++idx);
    DifferentialOptions o;
    o.phi_A = kPi / 2 + (noise.omega_0 - noise.omega_A) * T;
    o.phi_B = kPi / 2 + (noise.omega_0 - noise.omega_B) * T;
    o.histogram_bins = 1;
    const auto d = differential_experiment(input, nc, o);
    ClockPoint p;
    p.T = T;
    p.cycles = noise.T_tot / T;
    p.var_phase_diff = d.var_diff;
    const double scale = noise.omega_0 * T;
    p.var_fractional = d.var_diff / (scale * scale) / p.cycles;
    // theta_A - theta_B = (omega_B - omega_A) T
    p.mean_fractional = -d.mean_diff / scale;
    p.sql_reference = 4.0 / (noise.omega_0 * noise.omega_0 * n * T * noise.T_tot);
    out.push_back(p);
  }
  return out;
}

inline std::vector<ClockPoint> clock_experiment(const ProtocolConfig& cfg, const NoiseConfig& noise,
                                                const std::vector<double>& times) {
  return clock_experiment(prepare_input_state(cfg), noise, times);
}

}  // namespace sqswap
