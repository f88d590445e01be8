#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "oracle.hpp"
#include "test_util.hpp"
#include "sqswap/evolution.hpp"
#include "sqswap/operators.hpp"
#include "sqswap/protocol.hpp"

using namespace sqswap;

namespace {

std::vector<double> marginal_of(const StateVector& s, Mode m) { return mode_marginal(s, m); }

void expect_same(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "entry " << i;
}

}  // namespace

// ---------------------------------------------------------------- basis

TEST(Basis, Sizes) {
  EXPECT_EQ(build_basis(1)->size(), 4u);
  EXPECT_EQ(build_basis(2)->size(), 10u);
  EXPECT_EQ(build_basis(100)->size(), 176851u);
}

TEST(Basis, BijectiveLexicographic) {
  const auto b = build_basis(7);
  std::set<Occupation> seen;
  for (std::size_t i = 0; i < b->size(); ++i) {
    const Occupation o = b->state(i);
    EXPECT_EQ(o[0] + o[1] + o[2] + o[3], 7);
    EXPECT_EQ(b->index_of(o), i);
    if (i > 0) {
      EXPECT_LT(b->state(i - 1), o);
    }
    seen.insert(o);
  }
  EXPECT_EQ(seen.size(), b->size());
}

TEST(Basis, CapacityExceeded) {
  EXPECT_THROW(build_basis(401), CapacityExceeded);
  EXPECT_THROW(build_basis(20, 10), CapacityExceeded);
  EXPECT_NO_THROW(build_basis(20, 20));
  EXPECT_THROW(build_basis(0), InvalidArgument);
}

// ---------------------------------------------------------------- initial state

TEST(Initial, OneAtom) {
  const auto s = prepare_initial(1);
  EXPECT_NEAR(std::abs(s.amplitude({1, 0, 0, 0})), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(std::abs(s.amplitude({0, 0, 0, 1})), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(std::abs(s.amplitude({0, 1, 0, 0})), 0.0);
}

TEST(Initial, TwoAtomsDistribution) {
  const auto d = outcome_distribution(prepare_initial(2));
  EXPECT_NEAR(d({2, 0, 0, 0}), 0.25, 1e-15);
  EXPECT_NEAR(d({1, 0, 0, 1}), 0.50, 1e-15);
  EXPECT_NEAR(d({0, 0, 0, 2}), 0.25, 1e-15);
  EXPECT_NEAR(d.total(), 1.0, 1e-15);
}

TEST(Initial, BinomialMoments) {
  // Exact binomial statistics: variance N/4, not N/2.
  const auto m = mode_marginal(prepare_initial(100), Mode::a);
  double mean = 0, sq = 0;
  for (std::size_t k = 0; k < m.size(); ++k) mean += k * m[k], sq += double(k) * k * m[k];
  EXPECT_NEAR(mean, 50.0, 1e-10);
  EXPECT_NEAR(sq - mean * mean, 25.0, 1e-9);
}

// ---------------------------------------------------------------- operators

TEST(Operators, SingleAtomExamples) {
  const auto b = build_basis(1);
  StateVector s(b);
  s[b->index_of({1, 0, 0, 0})] = 1.0;
  const auto jz = pair_spin_operator(*b, Pair::ab, Axis::z).apply(s);
  EXPECT_NEAR(jz[b->index_of({1, 0, 0, 0})].real(), 0.5, 1e-15);
  const auto jx = pair_spin_operator(*b, Pair::ab, Axis::x).apply(s);
  EXPECT_NEAR(jx[b->index_of({0, 1, 0, 0})].real(), 0.5, 1e-15);
  EXPECT_NEAR(std::abs(jx[b->index_of({1, 0, 0, 0})]), 0.0, 1e-15);
}

TEST(Operators, CommutatorsAndHermiticity) {
  const cplx I(0.0, 1.0);
  for (int n = 1; n <= 6; ++n) {
    const auto b = build_basis(n);
    for (Pair p : {Pair::ab, Pair::cd, Pair::bc, Pair::ad}) {
      const auto j = oracle::pair_ops(*b, p);
      EXPECT_LT((j.x * j.y - j.y * j.x - I * j.z).cwiseAbs().maxCoeff(), 1e-14);
      EXPECT_LT((j.y * j.z - j.z * j.y - I * j.x).cwiseAbs().maxCoeff(), 1e-14);
      EXPECT_LT((j.z * j.x - j.x * j.z - I * j.y).cwiseAbs().maxCoeff(), 1e-14);
      for (const auto* m : {&j.x, &j.y, &j.z}) EXPECT_EQ((*m - m->adjoint()).cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(Operators, BasisMismatch) {
  const auto op = pair_spin_operator(*build_basis(3), Pair::ab, Axis::x);
  EXPECT_THROW(op.apply(prepare_initial(4)), BasisMismatch);
}

TEST(Operators, MomentsOfInitialState) {
  const auto s = prepare_initial(100);
  const auto& b = s.basis();
  const auto t = moments(s, std::vector<PairOperator>{pair_spin_operator(b, Pair::ab, Axis::z),
                                                       pair_spin_operator(b, Pair::ab, Axis::x),
                                                       pair_spin_operator(b, Pair::cd, Axis::y)});
  EXPECT_NEAR(t.mean[0], 25.0, 1e-10);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_GE(t.var(i), -1e-12);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(t.cov[i][j], t.cov[j][i]);
  }
  // the real-component shortcut agrees with the sparse path
  const auto u = moments(s, std::vector<PairComponent>{{Pair::ab, Axis::z}, {Pair::ab, Axis::x}});
  EXPECT_NEAR(u.mean[0], t.mean[0], 1e-12);
  EXPECT_NEAR(u.cov[1][1], t.cov[1][1], 1e-10);
}

// ---------------------------------------------------------------- evolutions vs oracle

TEST(Evolution, IdentityAtZeroStrength) {
  const auto s = oracle::random_state(build_basis(5), 3);
  EXPECT_LT(oracle::max_diff(evolve_squeezing(s, Generator::oat, 0, 0), oracle::vec(s)), 1e-12);
  EXPECT_LT(oracle::max_diff(evolve_squeezing(s, Generator::tat, 0, 0), oracle::vec(s)), 1e-12);
  EXPECT_LT(oracle::max_diff(apply_mode_swap(s, 0, 1.3), oracle::vec(s)), 1e-12);
  EXPECT_LT(oracle::max_diff(encode_phases(s, 0, 0), oracle::vec(s)), 1e-12);
}

TEST(Evolution, OatMatchesDenseExponential) {
  const auto b = build_basis(4);
  ASSERT_EQ(b->size(), 35u);
  const auto s = prepare_initial(b);
  const auto out = evolve_squeezing(s, Generator::oat, 0.1, 0.0);
  EXPECT_LT(oracle::max_diff(out, oracle::oat(*b, 0.1, 0.0) * oracle::vec(s)), 1e-9);
}

TEST(Evolution, AllEvolutionsMatchOracleUpToSix) {
  for (int n = 1; n <= 6; ++n) {
    const auto b = build_basis(n);
    const auto s = oracle::random_state(b, 100 + n);
    const auto v = oracle::vec(s);
    EXPECT_LT(oracle::max_diff(evolve_squeezing(s, Generator::oat, 0.37, 1.1), oracle::oat(*b, 0.37, 1.1) * v), 1e-9);
    EXPECT_LT(oracle::max_diff(evolve_squeezing(s, Generator::tat, 0.21, -0.7), oracle::tat(*b, 0.21, -0.7) * v), 1e-9);
    EXPECT_LT(oracle::max_diff(apply_mode_swap(s, 1.3, -0.4), oracle::mode_swap(*b, 1.3, -0.4) * v), 1e-9);
    EXPECT_LT(oracle::max_diff(encode_phases(s, 0.9, 2.2), oracle::encode(*b, 0.9, 2.2) * v), 1e-9);
    for (Pair p : {Pair::ab, Pair::cd, Pair::bc, Pair::ad}) {
      const auto j = oracle::pair_ops(*b, p);
      EXPECT_LT(oracle::max_diff(rotate(s, p, Axis::x, 0.8), oracle::expm_i(0.8 * j.x) * v), 1e-9);
      EXPECT_LT(oracle::max_diff(rotate(s, p, Axis::y, -1.7), oracle::expm_i(-1.7 * j.y) * v), 1e-9);
      EXPECT_LT(oracle::max_diff(rotate(s, p, Axis::z, 2.5), oracle::expm_i(2.5 * j.z) * v), 1e-9);
    }
  }
}

TEST(Evolution, MidProtocolDistributionMatchesOracle) {
  const auto b = build_basis(4);
  ProtocolConfig c;
  c.n_atoms = 4;
  c.tau_E = 0.3, c.nu_E = 2.0, c.theta_MS = kPi / 2, c.phi_MS = -kPi / 8;
  const auto s0 = prepare_initial(b);
  StateVector s = evolve_squeezing(s0, c.generator, c.tau_E, c.nu_E);
  s = apply_mode_swap(s, c.theta_MS, c.phi_MS);
  const auto d = outcome_distribution(s);
  const Eigen::VectorXcd ref = oracle::mode_swap(*b, c.theta_MS, c.phi_MS) *
                               oracle::oat(*b, c.tau_E, c.nu_E) * oracle::vec(s0);
  for (std::size_t i = 0; i < b->size(); ++i) EXPECT_NEAR(d.probabilities[i], std::norm(ref[i]), 1e-9);
  EXPECT_NEAR(d.total(), 1.0, 1e-10);
}

// ---------------------------------------------------------------- conservation

TEST(Conservation, MarginalsPerEvolution) {
  const auto s = oracle::random_state(build_basis(8), 7);
  const auto sq = evolve_squeezing(s, Generator::oat, 0.4, 0.3);
  expect_same(marginal_of(sq, Mode::c), marginal_of(s, Mode::c), 1e-12);
  expect_same(marginal_of(sq, Mode::d), marginal_of(s, Mode::d), 1e-12);
  expect_same(pair_total_marginal(sq, Pair::ab), pair_total_marginal(s, Pair::ab), 1e-12);

  const auto ms = apply_mode_swap(s, 1.1, 0.6);
  expect_same(marginal_of(ms, Mode::a), marginal_of(s, Mode::a), 1e-12);
  expect_same(marginal_of(ms, Mode::d), marginal_of(s, Mode::d), 1e-12);
  expect_same(pair_total_marginal(ms, Pair::bc), pair_total_marginal(s, Pair::bc), 1e-12);

  const auto en = encode_phases(s, 0.7, 2.9);
  expect_same(pair_total_marginal(en, Pair::ab), pair_total_marginal(s, Pair::ab), 1e-12);
  expect_same(pair_total_marginal(en, Pair::cd), pair_total_marginal(s, Pair::cd), 1e-12);
}

TEST(Conservation, NormAtLargeN) {
  ProtocolConfig c;
  c.n_atoms = 200;
  c.tau_E = 0.05, c.nu_E = 1.0, c.theta_MS = kPi / 2, c.phi_MS = 0.3;
  const auto r = run_mepe(c);
  EXPECT_NEAR(r.input.norm(), 1.0, 1e-10);
  EXPECT_NEAR(r.output.norm(), 1.0, 1e-10);
}

TEST(Encoding, FringeLawOnGrid) {
  // <J_z>_out = <J_z>_in cos(theta) - <J_x>_in sin(theta) for exp(-i theta J_y).
  const auto in = evolve_squeezing(prepare_initial(20), Generator::oat, 0.05, 0.8);
  const auto m = moments(in, std::vector<PairComponent>{{Pair::ab, Axis::z}, {Pair::ab, Axis::x}});
  for (int i = 0; i <= 16; ++i) {
    const double th = kPi * i / 16;
    const auto out = encode_phases(in, th, 0.0);
    const auto o = moments(out, std::vector<PairComponent>{{Pair::ab, Axis::z}});
    EXPECT_NEAR(o.mean[0], fringe_mean(m.mean[0], m.mean[1], th), 1e-9) << "theta=" << th;
  }
}

TEST(Encoding, FullTurnKeepsProbabilities) {
  const auto s = oracle::random_state(build_basis(6), 11);
  const auto a = outcome_distribution(s), b = outcome_distribution(encode_phases(s, 2 * kPi, 2 * kPi));
  for (std::size_t i = 0; i < a.probabilities.size(); ++i) EXPECT_NEAR(a.probabilities[i], b.probabilities[i], 1e-12);
}

// ---------------------------------------------------------------- norm policy

TEST(NormPolicy, SilentWarnAndThrow) {
  WarningCapture cap;
  auto base = prepare_initial(3);

  StateVector tiny = base;
  tiny.scale(1 + 1e-12);
  EXPECT_NO_THROW(rotate(tiny, Pair::ab, Axis::x, 0.3));
  EXPECT_TRUE(cap.seen.empty());

  StateVector mid = base;
  mid.scale(1 + 1e-9);
  const auto r = rotate(mid, Pair::ab, Axis::x, 0.3);
  EXPECT_FALSE(cap.seen.empty());
  EXPECT_NEAR(r.norm(), 1.0, 1e-14);

  StateVector big = base;
  big.scale(1 + 1e-7);
  EXPECT_THROW(evolve_squeezing(big, Generator::oat, 0.1, 0), NonNormalizedInput);
  EXPECT_THROW(apply_mode_swap(big, 0.1, 0), NonNormalizedInput);
  EXPECT_THROW(encode_phases(big, 0.1, 0), NonNormalizedInput);
  EXPECT_THROW(outcome_distribution(big), NonNormalizedInput);
}

// ---------------------------------------------------------------- serialization

TEST(Dump, RoundTripAndHeader) {
  const auto s = oracle::random_state(build_basis(5), 2);
  std::stringstream ss;
  write_state(ss, s);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 5 + 8 + 8 + 16 * s.size());
  EXPECT_EQ(bytes.substr(0, 5), "SQSW1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[5]), 5);  // little-endian N
  EXPECT_EQ(static_cast<unsigned char>(bytes[13]), 56);  // C(8,3)
  const auto r = read_state(ss);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(r[i], s[i]);

  std::stringstream bad("XXXXX");
  EXPECT_THROW(read_state(bad), InvalidArgument);
}

// ---------------------------------------------------------------- threading

TEST(Parallel, ResultIndependentOfWorkers) {
  ProtocolConfig c;
  c.n_atoms = 60;
  c.tau_E = 0.07, c.nu_E = 2.4, c.theta_MS = 1.2, c.phi_MS = -0.5;
  set_max_threads(1);
  const auto a = run_mepe(c);
  set_max_threads(4);
  const auto b = run_mepe(c);
  set_max_threads(0);
  for (std::size_t i = 0; i < a.output.size(); ++i) ASSERT_EQ(a.output[i], b.output[i]);
  EXPECT_EQ(a.report.var_diff, b.report.var_diff);
}
