#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <mutex>
#include <vector>

#include "sqswap/parallel.hpp"
#include "sqswap/state.hpp"

namespace sqswap {

// All evolutions act on a single mode pair. The pair total n is conserved,
// so each one reduces to a dense (n+1)x(n+1) matrix applied to every sector
// sharing that n. Matrices are built from cached eigendecompositions.

namespace detail {

/// J_z eigenvalue of the sector index k for pair total n.
inline double spin_m(int k, int n) { return k - 0.5 * n; }

template <class Solver, class Build>
const Solver& cached_solver(std::vector<std::unique_ptr<Solver>>& cache, std::mutex& mu, int n,
                            Build&& build) {
  std::lock_guard lock(mu);
  if (cache.size() <= static_cast<std::size_t>(n)) cache.resize(static_cast<std::size_t>(n) + 1);
  auto& slot = cache[static_cast<std::size_t>(n)];
  if (!slot) slot = std::make_unique<Solver>(build(n));
  return *slot;
}

using JxSolver = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>;
using TatSolver = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>;

/// Eigendecomposition of J_x on the (n+1)-dimensional sector (tridiagonal).
inline const JxSolver& jx_spectrum(int n) {
  static std::vector<std::unique_ptr<JxSolver>> cache;
  static std::mutex mu;
  return cached_solver(cache, mu, n, [](int m) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(m + 1);
    Eigen::VectorXd off(std::max(m, 0));
    for (int k = 0; k < m; ++k) off[k] = 0.5 * std::sqrt((k + 1.0) * (m - k));
    JxSolver es;
    es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
    return es;
  });
}

/// Eigendecomposition of the Hermitian H = i[(J+)^2 - (J-)^2] on a sector.
inline const TatSolver& tat_spectrum(int n) {
  static std::vector<std::unique_ptr<TatSolver>> cache;
  static std::mutex mu;
  return cached_solver(cache, mu, n, [](int m) {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m + 1, m + 1);
    for (int k = 0; k + 2 <= m; ++k) {
      const double a = std::sqrt((k + 1.0) * (m - k) * (k + 2.0) * (m - k - 1.0));
      h(k + 2, k) = cplx(0.0, a);
      h(k, k + 2) = cplx(0.0, -a);
    }
    return TatSolver(h);
  });
}

/// V f(lambda) V^dag for a cached spectrum.
template <class Solver, class F>
Eigen::MatrixXcd spectral_function(const Solver& es, F&& f) {
  const auto& vals = es.eigenvalues();
  const auto& vecs = es.eigenvectors();
  Eigen::VectorXcd phase(vals.size());
  for (Eigen::Index j = 0; j < vals.size(); ++j) phase[j] = f(vals[j]);
  return vecs.template cast<cplx>() * phase.asDiagonal() * vecs.adjoint().template cast<cplx>();
}

/// Conjugates a sector matrix by J_z phases: e^{-i a J_z} M e^{+i a J_z}.
inline void conjugate_by_jz(Eigen::MatrixXcd& m, int n, double a) {
  for (int j = 0; j <= n; ++j) {
    for (int k = 0; k <= n; ++k) {
      m(j, k) *= std::polar(1.0, -a * (spin_m(j, n) - spin_m(k, n)));
    }
  }
}

}  // namespace detail

/// exp(-i theta J_x) on the sector of pair total n.
inline Eigen::MatrixXcd sector_rotation_x(int n, double theta) {
  return detail::spectral_function(detail::jx_spectrum(n),
                                   [theta](double l) { return std::polar(1.0, -theta * l); });
}

/// exp(-i theta J_y); real-valued up to round-off.
inline Eigen::MatrixXcd sector_rotation_y(int n, double theta) {
  auto m = sector_rotation_x(n, theta);
  detail::conjugate_by_jz(m, n, kPi / 2);
  return m;
}

/// exp(-i tau J_x^2).
inline Eigen::MatrixXcd sector_oat(int n, double tau) {
  return detail::spectral_function(detail::jx_spectrum(n),
                                   [tau](double l) { return std::polar(1.0, -tau * l * l); });
}

/// exp(-tau[(J+)^2 - (J-)^2]) = exp(i tau H).
inline Eigen::MatrixXcd sector_tat(int n, double tau) {
  return detail::spectral_function(detail::tat_spectrum(n),
                                   [tau](double l) { return std::polar(1.0, tau * l); });
}

/// exp(-i theta (cos(phi) J_x + sin(phi) J_y)) = e^{-i phi J_z} e^{-i theta J_x} e^{i phi J_z}.
inline Eigen::MatrixXcd sector_mode_swap(int n, double theta, double phi) {
  auto m = sector_rotation_x(n, theta);
  detail::conjugate_by_jz(m, n, phi);
  return m;
}

/// Applies make(n) to every sector of `pair`, in place.
template <class MakeMatrix>
void apply_sector_matrices(StateVector& s, Pair pair, MakeMatrix&& make) {
  const FockBasis& basis = s.basis();
  const int N = basis.atoms();
  auto amps = s.amplitudes();
  for (int n = 1; n <= N; ++n) {
    const Eigen::MatrixXcd m = make(n);
    const int spectators = N - n;
    parallel_for(
        static_cast<std::size_t>(spectators) + 1,
        [&](std::size_t x) {
          const PairModes pm = modes_of(pair);
          Occupation occ{};
          occ[pm.other0] = static_cast<int>(x);
          occ[pm.other1] = spectators - static_cast<int>(x);
          std::vector<std::size_t> idx(static_cast<std::size_t>(n) + 1);
          Eigen::VectorXcd v(n + 1);
          for (int k = 0; k <= n; ++k) {
            occ[pm.first] = k;
            occ[pm.second] = n - k;
            idx[static_cast<std::size_t>(k)] = basis.index_unchecked(occ);
            v[k] = amps[idx[static_cast<std::size_t>(k)]];
          }
          const Eigen::VectorXcd w = m * v;
          for (int k = 0; k <= n; ++k) amps[idx[static_cast<std::size_t>(k)]] = w[k];
        },
        8);
  }
}

/// In-place exp(-i angle J_z^{pair}).
inline void apply_jz_phase(StateVector& s, Pair pair, double angle) {
  if (angle == 0.0) return;
  const PairModes pm = modes_of(pair);
  const FockBasis& basis = s.basis();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Occupation o = basis.state(i);
    s[i] *= std::polar(1.0, -angle * 0.5 * (o[pm.first] - o[pm.second]));
  }
}

/// exp(-i angle J_axis^{pair}) applied to a copy of the state.
inline StateVector rotate(const StateVector& in, Pair pair, Axis axis, double angle) {
  StateVector s = in;
  detail::enforce_norm(s, "rotate");
  if (angle == 0.0) return s;
  switch (axis) {
    case Axis::z: apply_jz_phase(s, pair, angle); break;
    case Axis::x:
      apply_sector_matrices(s, pair, [angle](int n) { return sector_rotation_x(n, angle); });
      break;
    case Axis::y:
      apply_sector_matrices(s, pair, [angle](int n) { return sector_rotation_y(n, angle); });
      break;
  }
  detail::enforce_norm(s, "rotate");
  return s;
}

/// Squeezing on pair (a,b) followed by exp(-i nu J_z^{a,b}).
inline StateVector evolve_squeezing(const StateVector& in, Generator g, double tau, double nu) {
  StateVector s = in;
  detail::enforce_norm(s, "evolve_squeezing");
  if (tau != 0.0) {
    if (g == Generator::oat) {
      apply_sector_matrices(s, Pair::ab, [tau](int n) { return sector_oat(n, tau); });
    } else {
      apply_sector_matrices(s, Pair::ab, [tau](int n) { return sector_tat(n, tau); });
    }
  }
  apply_jz_phase(s, Pair::ab, nu);
  detail::enforce_norm(s, "evolve_squeezing");
  return s;
}

/// Tunable beam splitter between modes b and c.
inline StateVector apply_mode_swap(const StateVector& in, double theta, double phi) {
  StateVector s = in;
  detail::enforce_norm(s, "apply_mode_swap");
  if (theta != 0.0) {
    apply_sector_matrices(s, Pair::bc,
                          [theta, phi](int n) { return sector_mode_swap(n, theta, phi); });
  }
  detail::enforce_norm(s, "apply_mode_swap");
  return s;
}

/// exp(-i theta_A J_y^{a,b}) exp(-i theta_B J_y^{c,d}).
inline StateVector encode_phases(const StateVector& in, double theta_a, double theta_b) {
  StateVector s = in;
  detail::enforce_norm(s, "encode_phases");
  if (theta_b != 0.0) {
    apply_sector_matrices(s, Pair::cd, [theta_b](int n) { return sector_rotation_y(n, theta_b); });
  }
  if (theta_a != 0.0) {
    apply_sector_matrices(s, Pair::ab, [theta_a](int n) { return sector_rotation_y(n, theta_a); });
  }
  detail::enforce_norm(s, "encode_phases");
  return s;
}

}  // namespace sqswap
