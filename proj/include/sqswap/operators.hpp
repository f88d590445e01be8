#pragma once

#include <Eigen/Sparse>
#include <cmath>
#include <vector>

#include "sqswap/state.hpp"

namespace sqswap {

/// Collective pseudo-spin component on one mode pair, embedded in the
/// four-mode space.
struct PairOperator {
  Pair pair;
  Axis axis;
  int atoms;
  Eigen::SparseMatrix<cplx, Eigen::RowMajor> matrix;

  std::vector<cplx> apply(const StateVector& s) const {
    if (s.basis().atoms() != atoms) throw BasisMismatch("operator and state bases differ");
    Eigen::Map<const Eigen::VectorXcd> v(s.amplitudes().data(), static_cast<Eigen::Index>(s.size()));
    Eigen::VectorXcd w = matrix * v;
    return {w.data(), w.data() + w.size()};
  }
};

inline PairOperator pair_spin_operator(const FockBasis& basis, Pair pair, Axis axis) {
  const PairModes pm = modes_of(pair);
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(basis.size() * (axis == Axis::z ? 1 : 2));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const Occupation o = basis.state(i);
    const int up = o[pm.first];
    const int dn = o[pm.second];
    if (axis == Axis::z) {
      if (up != dn) trip.emplace_back(i, i, cplx(0.5 * (up - dn), 0.0));
      continue;
    }
    // J+ |up, dn> = sqrt((up+1) dn) |up+1, dn-1>, and its adjoint.
    if (dn > 0) {
      Occupation t = o;
      ++t[pm.first];
      --t[pm.second];
      const double a = 0.5 * std::sqrt((up + 1.0) * dn);
      trip.emplace_back(basis.index_unchecked(t), i, axis == Axis::x ? cplx(a, 0.0) : cplx(0.0, -a));
    }
    if (up > 0) {
      Occupation t = o;
      --t[pm.first];
      ++t[pm.second];
      const double a = 0.5 * std::sqrt(up * (dn + 1.0));
      trip.emplace_back(basis.index_unchecked(t), i, axis == Axis::x ? cplx(a, 0.0) : cplx(0.0, a));
    }
  }
  PairOperator op{pair, axis, basis.atoms(), {}};
  const auto dim = static_cast<Eigen::Index>(basis.size());
  op.matrix.resize(dim, dim);
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.matrix.makeCompressed();
  return op;
}

/// J_axis^{pair} applied to a state without materializing the operator.
/// Real-axis components only: J_x and J_z. Used in hot loops.
inline void apply_pair_real(const StateVector& s, Pair pair, Axis axis, std::vector<cplx>& out) {
  const FockBasis& basis = s.basis();
  const PairModes pm = modes_of(pair);
  out.assign(s.size(), cplx(0.0, 0.0));
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Occupation o = basis.state(i);
    const int up = o[pm.first];
    const int dn = o[pm.second];
    if (axis == Axis::z) {
      out[i] = 0.5 * (up - dn) * s[i];
    } else if (axis == Axis::x) {
      if (dn > 0) {
        Occupation t = o;
        ++t[pm.first];
        --t[pm.second];
        out[basis.index_unchecked(t)] += 0.5 * std::sqrt((up + 1.0) * dn) * s[i];
      }
      if (up > 0) {
        Occupation t = o;
        --t[pm.first];
        ++t[pm.second];
        out[basis.index_unchecked(t)] += 0.5 * std::sqrt(up * (dn + 1.0)) * s[i];
      }
    } else {
      throw InvalidArgument("apply_pair_real supports x and z only");
    }
  }
}

/// First moments and symmetrized covariance matrix of a list of observables.
struct MomentTable {
  std::vector<double> mean;
  std::vector<std::vector<double>> cov;  // Re<AB> - <A><B>, symmetric

  double var(std::size_t i) const { return cov[i][i]; }
};

namespace detail {
inline double re_inner(std::span<const cplx> a, std::span<const cplx> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return s;
}

inline MomentTable table_from_images(const StateVector& s, const std::vector<std::vector<cplx>>& img) {
  const std::size_t m = img.size();
  MomentTable t;
  t.mean.resize(m);
  t.cov.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) t.mean[i] = re_inner(s.amplitudes(), img[i]);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double c = re_inner(img[i], img[j]) - t.mean[i] * t.mean[j];
      t.cov[i][j] = t.cov[j][i] = c;
    }
  }
  return t;
}
}  // namespace detail

inline MomentTable moments(const StateVector& s, const std::vector<PairOperator>& ops) {
  std::vector<std::vector<cplx>> img;
  img.reserve(ops.size());
  for (const auto& op : ops) img.push_back(op.apply(s));
  return detail::table_from_images(s, img);
}

/// Same as moments() for J_x / J_z components, without sparse matrices.
struct PairComponent {
  Pair pair;
  Axis axis;
};

inline MomentTable moments(const StateVector& s, const std::vector<PairComponent>& comps) {
  std::vector<std::vector<cplx>> img(comps.size());
  for (std::size_t i = 0; i < comps.size(); ++i) apply_pair_real(s, comps[i].pair, comps[i].axis, img[i]);
  return detail::table_from_images(s, img);
}

}  // namespace sqswap
