#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "sqswap/gaussian.hpp"
#include "sqswap/numerics.hpp"
#include "sqswap/protocol.hpp"

namespace sqswap {

// ---------------------------------------------------------------------------
// Reduced objective and its minimum-point function.

inline double f_objective(double nu, double delta, double r) {
  const double a1 = kPi / 4 + nu;
  const double a2 = kPi / 4 + nu / 2 + delta;
  const double s = std::sin(a1) + std::sin(a2);
  const double c = std::cos(a1) + std::cos(a2);
  return std::expm1(2 * r) * s * s + std::expm1(-2 * r) * c * c;
}

/// x reduced into [0, period).
inline double wrap(double x, double period) {
  double y = std::fmod(x, period);
  if (y < 0) y += period;
  if (y >= period) y = 0.0;
  return y;
}

/// Signed distance between angles on a circle of the given period.
inline double circular_distance(double a, double b, double period) {
  return std::remainder(a - b, period);
}

namespace detail {
inline double branch_formula(double delta, double r, double c1, double c2) {
  const double A = std::expm1(2 * r);
  const double B = -std::expm1(-2 * r);
  return (c1 * kPi * A + c2 * kPi * B - (0.75 * A + 0.5 * B) * delta) / (1.125 * A + 1.25 * B);
}
}  // namespace detail

/// Branch around delta = -5pi/8.
inline double nu_min_branch1(double delta, double r) { return detail::branch_formula(delta, r, 21.0 / 8, 25.0 / 8); }
/// Branch around delta = -pi/8.
inline double nu_min_branch2(double delta, double r) { return detail::branch_formula(delta, r, 33.0 / 8, 37.0 / 8); }

inline double nu_min_small_r_branch1(double delta) { return 46 * kPi / 19 - 10 * delta / 19; }
inline double nu_min_small_r_branch2(double delta) { return 70 * kPi / 19 - 10 * delta / 19; }
inline double nu_min_large_r_branch1(double delta) { return 7 * kPi / 3 - 2 * delta / 3; }
inline double nu_min_large_r_branch2(double delta) { return 11 * kPi / 3 - 2 * delta / 3; }

/// Analytic minimum point in [0, 4pi). delta is first mapped into
/// [-7pi/8, -3pi/8) by delta -> delta - k pi/2, nu -> nu + k pi.
inline double nu_min_analytic(double delta, double r) {
  const double k = std::floor((delta + 7 * kPi / 8) / (kPi / 2));
  const double dc = delta - k * kPi / 2;
  return wrap(nu_min_branch1(dc, r) + k * kPi, 4 * kPi);
}

namespace detail {
inline constexpr int kNuScan = 4096;
inline constexpr double kNuTol = 1e-6;

inline std::vector<double> nu_scan(double delta, double r) {
  std::vector<double> f(kNuScan);
  for (int i = 0; i < kNuScan; ++i) f[i] = f_objective(4 * kPi * i / kNuScan, delta, r);
  return f;
}

inline double refine_nu(int i, double delta, double r) {
  const double h = 4 * kPi / kNuScan;
  const double c = 4 * kPi * i / kNuScan;
  const auto [x, fx] =
      golden_section_min([&](double nu) { return f_objective(nu, delta, r); }, c - h, c + h, kNuTol);
  (void)fx;
  return wrap(x, 4 * kPi);
}
}  // namespace detail

/// Global minimizer of f over nu in [0, 4pi): dense scan then golden section.
inline double nu_min_numeric(double delta, double r) {
  const auto f = detail::nu_scan(delta, r);
  const int i = static_cast<int>(std::min_element(f.begin(), f.end()) - f.begin());
  return detail::refine_nu(i, delta, r);
}

/// Every global minimizer (degenerate minima appear at branch boundaries).
/// Local minima of the scan whose refined values lie within rel_tol of the
/// global minimum are returned in ascending order.
inline std::vector<double> nu_min_numeric_all(double delta, double r, double rel_tol = 1e-9) {
  const auto f = detail::nu_scan(delta, r);
  const int n = detail::kNuScan;
  std::vector<std::pair<double, double>> cands;
  for (int i = 0; i < n; ++i) {
    const double l = f[(i + n - 1) % n], m = f[i], rr = f[(i + 1) % n];
    if (m <= l && m < rr) {
      const double x = detail::refine_nu(i, delta, r);
      cands.emplace_back(x, f_objective(x, delta, r));
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) best = std::min(best, c.second);
  const double tol = rel_tol * std::max(1.0, std::abs(best));
  std::vector<double> out;
  for (const auto& c : cands) {
    if (c.second <= best + tol) out.push_back(c.first);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Reference squeezing strength.
inline double tau_ref(int n_atoms, Generator g) {
  if (n_atoms < 2) throw InvalidArgument("tau_ref needs N >= 2");
  if (g == Generator::oat) return 1.2 * std::pow(n_atoms / 2.0, -2.0 / 3.0);
  return std::log10(2 * kPi * n_atoms) / (4.0 * n_atoms);
}

struct OptimalConstants {
  double nu_E = 11 * kPi / 4;
  double delta_cb = -5 * kPi / 8;
  double phi_MS = -kPi / 8;
  double theta_MS = kPi / 2;
  double u_bb_mag = std::sqrt(0.5);
  double u_cb_mag = std::sqrt(0.5);

  /// Family member: delta_cb = -pi/8 + l pi/2, nu_E = 2 delta_cb + 4 m pi.
  static std::pair<double, double> family(int l, int m) {
    const double d = -kPi / 8 + l * kPi / 2;
    return {2 * d + 4 * m * kPi, d};
  }
};

inline OptimalConstants optimal_conditions() { return {}; }

// ---------------------------------------------------------------------------
// Exact-protocol optimization.

enum class Param { nu_E, phi_MS, theta_MS, tau_E };

inline std::string to_string(Param p) {
  switch (p) {
    case Param::nu_E: return "nu_E";
    case Param::phi_MS: return "phi_MS";
    case Param::theta_MS: return "theta_MS";
    case Param::tau_E: return "tau_E";
  }
  return "?";
}

enum class OptMethod { analytic, grid, refined };

inline std::string to_string(OptMethod m) {
  switch (m) {
    case OptMethod::analytic: return "analytic";
    case OptMethod::grid: return "grid";
    case OptMethod::refined: return "refined";
  }
  return "?";
}

struct OptResult {
  double nu_opt = 0.0;
  double phi_ms_opt = 0.0;
  double theta_ms_opt = 0.0;
  double tau_opt = 0.0;
  double gain_at_opt = 0.0;
  OptMethod method = OptMethod::grid;
  std::size_t evaluations = 0;
  bool budget_exhausted = false;
  // |G(nu + pi, phi + pi/2) - G(nu, phi)| at the optimum when phi was free
  double phi_period_residual = std::numeric_limits<double>::quiet_NaN();
};

/// Mid-fringe gain of the exact protocol at arbitrary knobs. Squeezed
/// states are cached per tau (a few dozen at most).
class ProtocolEvaluator {
 public:
  ProtocolEvaluator(int n_atoms, Generator g, std::size_t cache_size = 24)
      : basis_(build_basis(n_atoms)), gen_(g), cap_(cache_size) {}

  const BasisPtr& basis() const { return basis_; }
  Generator generator() const { return gen_; }

  std::shared_ptr<const SwapScanner> scanner(double tau) const {
    std::lock_guard lock(mu_);
    auto it = cache_.find(tau);
    if (it != cache_.end()) return it->second;
    auto sc = std::make_shared<const SwapScanner>(basis_, gen_, tau);
    if (cache_.size() >= cap_) {
      cache_.erase(order_.front());
      order_.pop_front();
    }
    cache_.emplace(tau, sc);
    order_.push_back(tau);
    return sc;
  }

  InputMoments moments(double tau, double nu, double theta_ms, double phi_ms) const {
    return scanner(tau)->moments_at(nu, theta_ms, phi_ms);
  }

  double gain(double tau, double nu, double theta_ms, double phi_ms) const {
    return moments(tau, nu, theta_ms, phi_ms).gain(kPi / 2, kPi / 2);
  }

 private:
  BasisPtr basis_;
  Generator gen_;
  std::size_t cap_;
  mutable std::mutex mu_;
  mutable std::map<double, std::shared_ptr<const SwapScanner>> cache_;
  mutable std::list<double> order_;
};

struct OptimizeOptions {
  std::size_t budget = 20000;  // maximum gain evaluations
  int grid = 0;                // points per free dimension; 0 picks 64/32/16/8 by dimension
  int refine_rounds = 3;
};

namespace detail {
struct ParamRange {
  double lo, hi;
  bool periodic;
};

inline ParamRange param_range(Param p, double tref) {
  switch (p) {
    case Param::nu_E: return {0.0, 4 * kPi, true};
    case Param::phi_MS: return {-kPi / 2, kPi / 2, true};
    case Param::theta_MS: return {0.0, kPi, false};
    case Param::tau_E: return {0.0, 2 * tref, false};
  }
  return {0.0, 1.0, false};
}

inline int default_grid(std::size_t dims) {
  switch (dims) {
    case 1: return 64;
    case 2: return 64;
    case 3: return 16;
    default: return 8;
  }
}
}  // namespace detail

/// Coarse grid over the free parameters, then coordinate-wise golden-section
/// rounds within one grid step of the incumbent. Deterministic: grid values
/// are reduced in lexicographic order and the first maximum wins.
inline OptResult optimize_protocol(const ProtocolConfig& cfg, const std::vector<Param>& free_params,
                                   const OptimizeOptions& opt = {},
                                   const ProtocolEvaluator* shared = nullptr) {
  cfg.validate();
  std::unique_ptr<ProtocolEvaluator> own;
  if (!shared) {
    own = std::make_unique<ProtocolEvaluator>(cfg.n_atoms, cfg.generator);
    shared = own.get();
  }
  const ProtocolEvaluator& ev = *shared;
  const double tref = tau_ref(cfg.n_atoms, cfg.generator);

  // tau varies slowest so each squeezed state is built once per grid value
  std::vector<Param> params = free_params;
  auto rank = [](Param p) { return p == Param::tau_E ? -1 : static_cast<int>(p); };
  std::sort(params.begin(), params.end(), [&](Param a, Param b) { return rank(a) < rank(b); });
  params.erase(std::unique(params.begin(), params.end()), params.end());
  const std::size_t dims = params.size();

  // x = (nu, phi, theta, tau)
  std::array<double, 4> base = {cfg.nu_E, cfg.phi_MS, cfg.theta_MS, cfg.tau_E};
  auto slot = [](Param p) { return static_cast<std::size_t>(p); };
  OptResult res;
  auto eval = [&](const std::array<double, 4>& x) {
    ++res.evaluations;
    try {
      return ev.gain(x[3], x[0], x[2], x[1]);
    } catch (const DegenerateWorkingPoint&) {
      return 0.0;
    }
  };

  if (dims == 0) {
    res.gain_at_opt = eval(base);
    res.nu_opt = base[0], res.phi_ms_opt = base[1], res.theta_ms_opt = base[2], res.tau_opt = base[3];
    return res;
  }

  const int g = opt.grid > 0 ? opt.grid : detail::default_grid(dims);
  std::vector<detail::ParamRange> ranges;
  std::vector<double> step;
  for (Param p : params) {
    const auto rg = detail::param_range(p, tref);
    ranges.push_back(rg);
    step.push_back((rg.hi - rg.lo) / (rg.periodic ? g : g - 1));
  }
  std::size_t total = 1;
  for (std::size_t d = 0; d < dims; ++d) total *= static_cast<std::size_t>(g);
  const std::size_t n_grid = std::min(total, opt.budget);
  res.budget_exhausted = n_grid < total;

  auto point = [&](std::size_t flat) {
    std::array<double, 4> x = base;
    for (std::size_t d = dims; d-- > 0;) {
      const auto i = flat % static_cast<std::size_t>(g);
      flat /= static_cast<std::size_t>(g);
      x[slot(params[d])] = ranges[d].lo + static_cast<double>(i) * step[d];
    }
    return x;
  };

  std::vector<double> values(n_grid, 0.0);
  parallel_for(n_grid, [&](std::size_t k) {
    const auto x = point(k);
    try {
      values[k] = ev.gain(x[3], x[0], x[2], x[1]);
    } catch (const DegenerateWorkingPoint&) {
      values[k] = 0.0;
    }
  });
  res.evaluations += n_grid;
  std::size_t best_k = 0;
  for (std::size_t k = 1; k < n_grid; ++k) {
    if (values[k] > values[best_k]) best_k = k;
  }
  std::array<double, 4> best = point(best_k);
  double best_g = values[best_k];
  res.method = OptMethod::grid;

  for (int round = 0; round < opt.refine_rounds && !res.budget_exhausted; ++round) {
    for (std::size_t d = 0; d < dims; ++d) {
      if (res.evaluations + 60 > opt.budget) {
        res.budget_exhausted = true;
        break;
      }
      const std::size_t sl = slot(params[d]);
      double lo = best[sl] - step[d], hi = best[sl] + step[d];
      if (!ranges[d].periodic) lo = std::max(lo, ranges[d].lo), hi = std::min(hi, ranges[d].hi);
      auto x = best;
      const auto [arg, negg] = golden_section_min(
          [&](double v) {
            x[sl] = v;
            return -eval(x);
          },
          lo, hi, 1e-7 * std::max(1.0, ranges[d].hi - ranges[d].lo));
      if (-negg > best_g) {
        best_g = -negg;
        best[sl] = arg;
        res.method = OptMethod::refined;
      }
    }
  }

  // Canonical representative: (nu, phi) ~ (nu + pi, phi + pi/2), phi in [-3pi/8, pi/8).
  const bool phi_free = std::find(params.begin(), params.end(), Param::phi_MS) != params.end();
  if (phi_free) {
    const double k = std::floor((best[1] + 3 * kPi / 8) / (kPi / 2));
    best[1] -= k * kPi / 2;
    best[0] -= k * kPi;
    if (res.evaluations < opt.budget) {
      auto shifted = best;
      shifted[0] += kPi;
      shifted[1] += kPi / 2;
      res.phi_period_residual = std::abs(eval(shifted) - best_g);
    }
  }
  res.nu_opt = wrap(best[0], 4 * kPi);
  res.phi_ms_opt = best[1];
  res.theta_ms_opt = best[2];
  res.tau_opt = best[3];
  res.gain_at_opt = best_g;
  return res;
}

}  // namespace sqswap
