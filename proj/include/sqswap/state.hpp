#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sqswap/fock_basis.hpp"

namespace sqswap {

/// Complex amplitude vector over a FockBasis. Value semantics: copies are
/// deep, the basis is shared.
class StateVector {
 public:
  StateVector(BasisPtr basis, std::vector<cplx> amplitudes)
      : basis_(std::move(basis)), amps_(std::move(amplitudes)) {
    if (!basis_) throw InvalidArgument("state needs a basis");
    if (amps_.size() != basis_->size()) {
      throw BasisMismatch("amplitude count " + std::to_string(amps_.size()) +
                          " does not match basis size " + std::to_string(basis_->size()));
    }
  }

  explicit StateVector(BasisPtr basis)
      : StateVector(basis, std::vector<cplx>(basis ? basis->size() : 0)) {}

  const FockBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  std::size_t size() const { return amps_.size(); }

  std::span<const cplx> amplitudes() const { return amps_; }
  std::span<cplx> amplitudes() { return amps_; }
  cplx& operator[](std::size_t i) { return amps_[i]; }
  const cplx& operator[](std::size_t i) const { return amps_[i]; }

  cplx amplitude(const Occupation& occ) const { return amps_[basis_->index_of(occ)]; }

  double norm() const { return std::sqrt(norm_squared()); }

  double norm_squared() const {
    double s = 0.0;
    for (const auto& z : amps_) s += std::norm(z);
    return s;
  }

  void scale(double f) {
    for (auto& z : amps_) z *= f;
  }

 private:
  BasisPtr basis_;
  std::vector<cplx> amps_;
};

namespace detail {

inline constexpr double kNormSilent = 1e-10;
inline constexpr double kNormError = 1e-8;

/// Norm policy for states entering or leaving an evolution: drift below
/// 1e-10 is renormalized silently, above 1e-8 is an error, in between warns.
inline void enforce_norm(StateVector& s, const char* where) {
  const double n = s.norm();
  const double drift = std::abs(n - 1.0);
  if (drift > kNormError || !std::isfinite(n)) {
    throw NonNormalizedInput(std::string(where) + ": state norm " + std::to_string(n) +
                             " deviates from 1");
  }
  if (drift > kNormSilent) {
    warn(std::string(where) + ": renormalizing state with norm drift " + std::to_string(drift));
  }
  if (drift > 0.0) s.scale(1.0 / n);
}

}  // namespace detail

/// Binomial state produced by a balanced split of N atoms between modes a and d.
inline StateVector prepare_initial(const BasisPtr& basis) {
  const int n = basis->atoms();
  StateVector s(basis);
  // C(N,m) / 2^N through lgamma keeps N up to the cap finite.
  for (int m = 0; m <= n; ++m) {
    const double log_w = std::lgamma(n + 1.0) - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0) -
                         n * std::log(2.0);
    s[basis->index_unchecked(n - m, 0, 0)] = std::exp(0.5 * log_w);
  }
  detail::enforce_norm(s, "prepare_initial");
  return s;
}

inline StateVector prepare_initial(int n_atoms, int cap = FockBasis::kDefaultCap) {
  return prepare_initial(build_basis(n_atoms, cap));
}

/// Joint detection probabilities P(N_a, N_b, N_c, N_d), indexed like the basis.
struct OutcomeDistribution {
  BasisPtr basis;
  std::vector<double> probabilities;

  double operator()(const Occupation& occ) const { return probabilities[basis->index_of(occ)]; }
  double total() const {
    double t = 0.0;
    for (double p : probabilities) t += p;
    return t;
  }
};

inline OutcomeDistribution outcome_distribution(const StateVector& s) {
  if (std::abs(s.norm() - 1.0) > detail::kNormError) {
    throw NonNormalizedInput("outcome_distribution: state is not normalized");
  }
  OutcomeDistribution d{s.basis_ptr(), std::vector<double>(s.size())};
  for (std::size_t i = 0; i < s.size(); ++i) d.probabilities[i] = std::norm(s[i]);
  return d;
}

/// Marginal distribution of one mode's occupation.
inline std::vector<double> mode_marginal(const StateVector& s, Mode mode) {
  const int n = s.basis().atoms();
  std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[static_cast<std::size_t>(s.basis().state(i)[static_cast<int>(mode)])] += std::norm(s[i]);
  }
  return out;
}

/// Marginal distribution of the total occupation of two modes.
inline std::vector<double> pair_total_marginal(const StateVector& s, Pair pair) {
  const PairModes m = modes_of(pair);
  const int n = s.basis().atoms();
  std::vector<double> out(static_cast<std::size_t>(n) + 1, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Occupation occ = s.basis().state(i);
    out[static_cast<std::size_t>(occ[m.first] + occ[m.second])] += std::norm(s[i]);
  }
  return out;
}

// Binary dump: "SQSW1", N (u64 LE), basis size (u64 LE), then (re, im)
// pairs as little-endian IEEE-754 doubles in basis order.

namespace detail {

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(buf, 8);
}

inline std::uint64_t get_u64_le(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) throw InvalidArgument("truncated state dump");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

}  // namespace detail

inline constexpr char kStateMagic[5] = {'S', 'Q', 'S', 'W', '1'};

inline void write_state(std::ostream& os, const StateVector& s) {
  os.write(kStateMagic, sizeof(kStateMagic));
  detail::put_u64_le(os, static_cast<std::uint64_t>(s.basis().atoms()));
  detail::put_u64_le(os, static_cast<std::uint64_t>(s.size()));
  for (const auto& z : s.amplitudes()) {
    detail::put_u64_le(os, std::bit_cast<std::uint64_t>(z.real()));
    detail::put_u64_le(os, std::bit_cast<std::uint64_t>(z.imag()));
  }
}

inline StateVector read_state(std::istream& is, int cap = FockBasis::kDefaultCap) {
  char magic[sizeof(kStateMagic)];
  if (!is.read(magic, sizeof(magic)) || !std::equal(magic, magic + 5, kStateMagic)) {
    throw InvalidArgument("not a state dump (bad magic)");
  }
  const auto n = detail::get_u64_le(is);
  const auto size = detail::get_u64_le(is);
  if (n == 0 || n > static_cast<std::uint64_t>(cap)) {
    throw CapacityExceeded("state dump N=" + std::to_string(n) + " outside basis cap");
  }
  auto basis = build_basis(static_cast<int>(n), cap);
  if (size != basis->size()) throw BasisMismatch("state dump size does not match C(N+3,3)");
  std::vector<cplx> amps(basis->size());
  for (auto& z : amps) {
    const double re = std::bit_cast<double>(detail::get_u64_le(is));
    const double im = std::bit_cast<double>(detail::get_u64_le(is));
    z = {re, im};
  }
  return StateVector(std::move(basis), std::move(amps));
}

}  // namespace sqswap
