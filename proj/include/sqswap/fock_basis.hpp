#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sqswap/errors.hpp"
#include "sqswap/types.hpp"

namespace sqswap {

/// Fixed-N four-mode Fock basis, ordered lexicographically in (n_a, n_b, n_c).
///
/// Indices are computed in closed form, so index_of is O(1) and the basis
/// stores only the packed tuples. Immutable after construction.
class FockBasis {
 public:
  static constexpr int kDefaultCap = 400;

  explicit FockBasis(int n_atoms, int cap = kDefaultCap) : n_(n_atoms) {
    if (n_atoms < 1) throw InvalidArgument("basis needs at least one atom");
    if (cap > 65535) cap = 65535;
    if (n_atoms > cap) {
      throw CapacityExceeded("N=" + std::to_string(n_atoms) + " exceeds the basis cap " +
                             std::to_string(cap));
    }
    a_offset_.resize(static_cast<std::size_t>(n_) + 2, 0);
    for (int na = 0; na <= n_; ++na) {
      const std::size_t rem = static_cast<std::size_t>(n_ - na);
      a_offset_[na + 1] = a_offset_[na] + (rem + 1) * (rem + 2) / 2;
    }
    states_.reserve(dimension(n_));
    for (int na = 0; na <= n_; ++na) {
      for (int nb = 0; nb <= n_ - na; ++nb) {
        for (int nc = 0; nc <= n_ - na - nb; ++nc) {
          states_.push_back({static_cast<std::uint16_t>(na), static_cast<std::uint16_t>(nb),
                             static_cast<std::uint16_t>(nc),
                             static_cast<std::uint16_t>(n_ - na - nb - nc)});
        }
      }
    }
  }

  /// C(N+3, 3).
  static constexpr std::size_t dimension(int n) {
    const auto m = static_cast<std::size_t>(n);
    return (m + 1) * (m + 2) * (m + 3) / 6;
  }

  int atoms() const { return n_; }
  std::size_t size() const { return states_.size(); }

  Occupation state(std::size_t i) const {
    const auto& s = states_[i];
    return {s[0], s[1], s[2], s[3]};
  }

  bool contains(const Occupation& occ) const {
    for (int v : occ) {
      if (v < 0) return false;
    }
    return occ[0] + occ[1] + occ[2] + occ[3] == n_;
  }

  /// Dense index of a tuple; the tuple must belong to the basis.
  std::size_t index_of(const Occupation& occ) const {
    if (!contains(occ)) throw InvalidArgument("occupation tuple not in basis");
    return index_unchecked(occ[0], occ[1], occ[2]);
  }

  std::size_t index_unchecked(int na, int nb, int nc) const {
    const std::size_t rem = static_cast<std::size_t>(n_ - na);
    const auto b = static_cast<std::size_t>(nb);
    return a_offset_[na] + b * (2 * rem + 3 - b) / 2 + static_cast<std::size_t>(nc);
  }

  std::size_t index_unchecked(const Occupation& occ) const {
    return index_unchecked(occ[0], occ[1], occ[2]);
  }

  bool operator==(const FockBasis& other) const { return n_ == other.n_; }

 private:
  int n_;
  std::vector<std::size_t> a_offset_;
  std::vector<std::array<std::uint16_t, 4>> states_;
};

using BasisPtr = std::shared_ptr<const FockBasis>;

inline BasisPtr build_basis(int n_atoms, int cap = FockBasis::kDefaultCap) {
  return std::make_shared<const FockBasis>(n_atoms, cap);
}

namespace detail {

/// Visits every sector of `pair` whose pair total equals n. A sector fixes
/// the spectator occupations; `fn` receives the dense indices ordered by
/// the number of atoms k = 0..n in the first mode of the pair.
template <class Fn>
void for_each_sector(const FockBasis& basis, Pair pair, int n, std::vector<std::size_t>& scratch,
                     Fn&& fn) {
  const PairModes m = modes_of(pair);
  const int spectators = basis.atoms() - n;
  scratch.resize(static_cast<std::size_t>(n) + 1);
  Occupation occ{};
  for (int x = 0; x <= spectators; ++x) {
    occ[m.other0] = x;
    occ[m.other1] = spectators - x;
    for (int k = 0; k <= n; ++k) {
      occ[m.first] = k;
      occ[m.second] = n - k;
      scratch[static_cast<std::size_t>(k)] = basis.index_unchecked(occ);
    }
    fn(static_cast<const std::vector<std::size_t>&>(scratch));
  }
}

}  // namespace detail
}  // namespace sqswap
