#pragma once

#include <cmath>
#include <utility>

#include "sqswap/numerics.hpp"
#include "sqswap/types.hpp"

namespace sqswap {

/// Two-mode unitary between b and c, written through its action
///   U^dag b U = |u_bb| e^{i d_bb} b - |u_cb| e^{-i d_bc} c
///   U^dag c U = |u_cb| e^{i d_cb} b + |u_bb| e^{-i d_cc} c
struct MSMatrix {
  double u_bb_mag = 1.0;
  double u_cb_mag = 0.0;
  double delta_bb = 0.0;
  double delta_cb = 0.0;
  double delta_bc = 0.0;
  double delta_cc = 0.0;

  static MSMatrix identity() { return {}; }

  /// Builds a matrix with delta_cc fixed by the unitarity constraint.
  static MSMatrix make(double u_bb, double u_cb, double d_bb, double d_cb, double d_bc) {
    return {u_bb, u_cb, d_bb, d_cb, d_bc, d_bb + d_bc - d_cb};
  }
};

/// The protocol's beam splitter exp(-i theta (cos(phi) J_x + sin(phi) J_y)) on (b, c).
inline MSMatrix ms_matrix_from_protocol(double theta_ms, double phi_ms) {
  const double d = phi_ms - kPi / 2;
  return MSMatrix::make(std::cos(theta_ms / 2), std::sin(theta_ms / 2), 0.0, d, d);
}

struct GaussianConfig {
  double alpha_a_mag = 0.0;
  double alpha_d_mag = 0.0;
  double phi_a0 = 0.0;
  double phi_d0 = 0.0;
  double r = 0.0;
  double phi0 = kPi / 2;
  double nu_E = 0.0;
  MSMatrix ms{};
  double v_A = 1.0;
  double v_B = -1.0;
  double theta_A = kPi / 2;
  double theta_B = kPi / 2;

  /// Balanced coherent inputs |alpha|^2 = N/2, zero coherent phases, phi0 = pi/2.
  static GaussianConfig protocol(int n_atoms, double r, double nu, const MSMatrix& ms) {
    GaussianConfig g;
    g.alpha_a_mag = g.alpha_d_mag = std::sqrt(0.5 * n_atoms);
    g.r = r;
    g.nu_E = nu;
    g.ms = ms;
    return g;
  }
};

/// Squeezing magnitude of the Bogoliubov picture for OAT strength tau.
inline double r_from_tau(int n_atoms, double tau) { return n_atoms * tau / 4.0; }

inline std::pair<double, double> chi_angles(const GaussianConfig& g) {
  const double chi_a = g.phi_a0 - g.phi0 / 2 - g.nu_E - g.ms.delta_bb;
  const double chi_b = g.phi_d0 - g.phi0 / 2 - g.nu_E / 2 - g.ms.delta_cb;
  return {chi_a, chi_b};
}

namespace detail {
inline double cot(double x) { return std::cos(x) / std::sin(x); }
}  // namespace detail

/// Closed-form variance of v_A theta_A + v_B theta_B for the Gaussian input.
/// With `deplete` false the s^2 corrections to the coherent amplitudes are
/// dropped (undepleted limit, N >> n_s).
inline double sensitivity_general(const GaussianConfig& g, int n_atoms, bool deplete = true) {
  const double s = std::sinh(g.r), c = std::cosh(g.r);
  const double s2 = deplete ? s * s : 0.0;
  const double aa = g.alpha_a_mag * g.alpha_a_mag;
  const double ad = g.alpha_d_mag * g.alpha_d_mag;
  const double ub = g.ms.u_bb_mag, uc = g.ms.u_cb_mag;
  const double da = aa - ub * ub * s2;
  const double dd = ad - uc * uc * s2;
  if (!(da > 0.0) || !(dd > 0.0)) {
    throw DenominatorNonPositive("coherent amplitude depleted below the squeezed population");
  }
  if (n_atoms > 0 && s * s > 0.1 * n_atoms) {
    warn("squeezed population exceeds N/10; the Gaussian model loses accuracy");
  }
  const auto [chi_a, chi_b] = chi_angles(g);
  const double ka = g.alpha_a_mag * ub / da;
  const double kd = g.alpha_d_mag * uc / dd;
  const double sin_term = ka * std::sin(chi_a) * g.v_A - kd * std::sin(chi_b) * g.v_B;
  const double cos_term = ka * std::cos(chi_a) * g.v_A - kd * std::cos(chi_b) * g.v_B;
  const double wa = (aa + ub * ub * s2) / (da * da) * g.v_A * g.v_A;
  const double wd = (ad + uc * uc * s2) / (dd * dd) * g.v_B * g.v_B;

  const double cta = detail::cot(g.theta_A), ctb = detail::cot(g.theta_B);
  const double mix = cta * ub * ub / da * g.v_A + ctb * uc * uc / dd * g.v_B;
  const double q = cta * cta * wa + ctb * ctb * wd + (2 * c * c - 1) * s2 * mix * mix;

  return std::expm1(2 * g.r) * sin_term * sin_term + std::expm1(-2 * g.r) * cos_term * cos_term +
         wa + wd + q;
}

/// Gain over the SQL in the undepleted regime: 1 / (e^{-2r} + n_s/N).
inline double gain_analytic(int n_atoms, double r) {
  const double ns = std::sinh(r) * std::sinh(r);
  if (ns > 0.1 * n_atoms) warn("n_s > N/10: gain formula outside its validity regime");
  return 1.0 / (std::exp(-2 * r) + ns / n_atoms);
}

struct GainMax {
  double gain;
  double n_s;
};

/// Maximum of the gain over a continuous squeezed population, using the
/// strong-squeezing form e^{-2r} = 1/(4 n_s) of the gain law.
inline GainMax gain_max(int n_atoms) {
  const double n = n_atoms;
  auto inv_gain = [n](double ns) { return 1.0 / (4.0 * ns) + ns / n; };
  // unimodal in log(n_s)
  const auto [lx, f] =
      golden_section_min([&](double l) { return inv_gain(std::exp(l)); }, std::log(1e-3),
                         std::log(10.0 * n), 1e-12);
  return {1.0 / f, std::exp(lx)};
}

/// Same maximization carried out on the exact gain law in r.
inline GainMax gain_max_exact(int n_atoms) {
  const auto [r, f] = golden_section_min([n_atoms](double x) { return -gain_analytic(n_atoms, x); },
                                         0.0, std::asinh(std::sqrt(0.1 * n_atoms)), 1e-12);
  return {-f, std::sinh(r) * std::sinh(r)};
}

struct NoSqueezingForms {
  double var_theory;
  double var_numerical;
};

inline NoSqueezingForms no_squeezing_closed_forms(double theta_a, double theta_b, int n_atoms) {
  auto boundary = [](double t) {
    const double m = std::remainder(t, kPi);
    return std::abs(m) < 1e-15;
  };
  if (boundary(theta_a) || boundary(theta_b)) {
    throw BoundaryPhase("closed forms are singular at theta in {0, pi}");
  }
  const double ca = detail::cot(theta_a), cb = detail::cot(theta_b);
  const double th = 2.0 / n_atoms * (ca * ca + cb * cb + 2.0);
  return {th, th - (ca - cb) * (ca - cb) / n_atoms};
}

enum class QuadratureKind { no_ms, optimal_ms, tmsv };

/// Variance of x_b + x_c at quadrature angle lambda. For no_ms the rotation
/// already aligns the squeezed axis (chi_A = 0). The tmsv value is the
/// lambda-independent textbook figure.
inline double quadrature_variance(QuadratureKind kind, double r, double lambda) {
  if (r < 0.0) throw InvalidArgument("r must be >= 0");
  const double sl = std::sin(lambda), cl = std::cos(lambda);
  switch (kind) {
    case QuadratureKind::no_ms:
      return 0.5 * (std::exp(2 * r) + 1) * sl * sl + 0.5 * (std::exp(-2 * r) + 1) * cl * cl;
    case QuadratureKind::optimal_ms:
      return std::exp(2 * r) * sl * sl + std::exp(-2 * r) * cl * cl;
    case QuadratureKind::tmsv:
      return 2.0 * std::exp(-2 * r);
  }
  return 0.0;
}

/// Mid-fringe differential variance of a two-mode squeezed vacuum in (b, c),
/// undepleted coherent a and d with |alpha|^2 = N/2. lambda is measured from
/// the best quadrature.
inline double tmsv_midfringe(double r, double lambda, int n_atoms) {
  const double var_sum = std::cosh(2 * r) - std::sinh(2 * r) * std::cos(2 * lambda);
  return 4.0 * var_sum / n_atoms;
}

/// Gaussian configuration realizing a quadrature kind at angle lambda.
/// The tmsv kind has no single-mode-squeezing representation.
inline GaussianConfig quadrature_config(QuadratureKind kind, int n_atoms, double r, double lambda) {
  switch (kind) {
    case QuadratureKind::no_ms: {
      // chi_A = -phi0/2 - nu = lambda
      return GaussianConfig::protocol(n_atoms, r, -kPi / 4 - lambda, MSMatrix::identity());
    }
    case QuadratureKind::optimal_ms: {
      const double nu = -kPi / 4 - lambda;
      const double d_cb = -kPi / 4 - nu / 2 - lambda;  // chi_B = lambda
      const double h = std::sqrt(0.5);
      return GaussianConfig::protocol(n_atoms, r, nu, MSMatrix::make(h, h, 0.0, d_cb, d_cb));
    }
    case QuadratureKind::tmsv: break;
  }
  throw InvalidArgument("two-mode squeezed vacuum is not a single-mode squeezed input");
}

/// Wineland parameter in the Bogoliubov picture.
inline double squeezing_parameter(double r) {
  if (r < 0.0) throw InvalidArgument("r must be >= 0");
  return std::exp(-2 * r);
}

/// Second-order series of the squeezing parameter in N tau.
inline double squeezing_series(int n_atoms, double tau) {
  const double x = n_atoms * tau;
  return 1.0 - x / 2 + x * x / 8;
}

}  // namespace sqswap
