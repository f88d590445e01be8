#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <string_view>

#include "sqswap/errors.hpp"

namespace sqswap {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

/// Occupation numbers (n_a, n_b, n_c, n_d) of the four bosonic modes.
using Occupation = std::array<int, 4>;

enum class Mode : int { a = 0, b = 1, c = 2, d = 3 };

/// Mode pairs carrying a collective pseudo-spin. The first mode of the
/// pair is the "up" mode: J_z = (n_first - n_second) / 2, J_+ = first^dag second.
enum class Pair { ab, cd, bc, ad };

enum class Axis { x, y, z };

enum class Generator { oat, tat };

struct PairModes {
  int first;
  int second;
  int other0;  // the two spectator modes, in ascending order
  int other1;
};

constexpr PairModes modes_of(Pair p) {
  switch (p) {
    case Pair::ab: return {0, 1, 2, 3};
    case Pair::cd: return {2, 3, 0, 1};
    case Pair::bc: return {1, 2, 0, 3};
    case Pair::ad: return {0, 3, 1, 2};
  }
  return {0, 1, 2, 3};
}

inline std::string_view to_string(Generator g) { return g == Generator::oat ? "oat" : "tat"; }

inline Generator parse_generator(std::string_view s) {
  if (s == "oat") return Generator::oat;
  if (s == "tat") return Generator::tat;
  throw InvalidArgument("unknown generator '" + std::string(s) + "' (expected oat|tat)");
}

/// All knobs of the mode-swapped squeezing protocol and of its
/// mode-separable reference.
struct ProtocolConfig {
  int n_atoms = 100;
  double tau_E = 0.0;     // squeezing strength
  double nu_E = 0.0;      // rotation about J_z^{a,b} after squeezing
  double theta_MS = 0.0;  // mode-swap coupling strength
  double phi_MS = 0.0;    // mode-swap laser phase
  double theta_A = kPi / 2;
  double theta_B = kPi / 2;
  Generator generator = Generator::oat;
  double tau_S_A = 0.0;  // separable variant: squeezing in interferometer A
  double tau_S_B = 0.0;  // separable variant: squeezing in interferometer B

  void validate() const {
    if (n_atoms < 1) throw InvalidArgument("n_atoms must be >= 1");
    for (double v : {tau_E, nu_E, theta_MS, phi_MS, theta_A, theta_B, tau_S_A, tau_S_B}) {
      if (!std::isfinite(v)) throw InvalidArgument("protocol parameters must be finite");
    }
  }
};

}  // namespace sqswap
