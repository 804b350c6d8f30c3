#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "rsp/spinsim.hpp"

using namespace rsp;

namespace {

StateVector random_state(std::size_t n, std::uint64_t seed) {
  return StateVector(n, random_start(hilbert_dim(n), seed));
}

XYHamiltonian pair_hamiltonian(double j) {
  XYHamiltonian h;
  h.n = 2;
  h.couplings.push_back({0, 1, j});
  return h;
}

AtomChain random_chain(std::mt19937_64& rng, std::size_t atoms, std::size_t sites) {
  LatticeParams p;
  p.n_sites = sites;
  p.filling = FixedCount{atoms};
  return sample_chain(p, rng);
}

// bit k = atom k, 1 = down
constexpr std::uint64_t kUpDown = 0b10;  // atom 0 up, atom 1 down
constexpr std::uint64_t kDownUp = 0b01;

}  // namespace

TEST(ApplyH, FlipFlopMatrixElement) {
  const auto h = pair_hamiltonian(1.0);
  const auto out = apply_h(h, StateVector::basis_state(2, kUpDown));
  EXPECT_NEAR(std::abs(out.amplitudes(kDownUp) - cplx(1.0)), 0.0, 1e-15);
  EXPECT_NEAR(out.amplitudes.norm(), 1.0, 1e-15);

  const auto up = apply_h(h, StateVector::basis_state(2, 0));
  EXPECT_EQ(up.amplitudes.norm(), 0.0);
}

TEST(ApplyH, Hermitian) {
  std::mt19937_64 rng(4);
  const auto chain = random_chain(rng, 7, 40);
  auto h = XYHamiltonian::interacting(chain, 5.0, 1.0);
  const auto field = XYHamiltonian::transverse(chain, 0.7, std::numbers::pi / 6);
  h.field = field.field;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto v = random_state(7, s), w = random_state(7, s + 100);
    const cplx a = overlap(v, apply_h(h, w)), b = overlap(w, apply_h(h, v));
    EXPECT_NEAR(std::abs(a - std::conj(b)), 0.0, 1e-12);
  }
  EXPECT_THROW(apply_h(h, random_state(6, 1)), DomainError);
}

TEST(ApplyH, ConservesMagnetization) {
  std::mt19937_64 rng(6);
  const auto chain = random_chain(rng, 8, 50);
  const auto h = XYHamiltonian::interacting(chain, 5.0, 1.0);
  const auto v = random_state(8, 3);
  for (int sector = 0; sector <= 8; ++sector) {
    StateVector proj(8);
    for (std::uint64_t b = 0; b < proj.dim(); ++b)
      if (std::popcount(b) == sector) proj.amplitudes(static_cast<Eigen::Index>(b)) = v.amplitudes(static_cast<Eigen::Index>(b));
    const auto out = apply_h(h, proj);
    double leak = 0.0;
    for (std::uint64_t b = 0; b < out.dim(); ++b)
      if (std::popcount(b) != sector) leak += std::norm(out.amplitudes(static_cast<Eigen::Index>(b)));
    EXPECT_LT(std::sqrt(leak), 1e-12);
  }
}

TEST(GroundState, TwoAtomSinglet) {
  const auto gs = ground_state(pair_hamiltonian(1.0));
  EXPECT_NEAR(gs.energy, -1.0, 1e-12);
  const auto singlet = singlet_product(2, {{0, 1}});
  EXPECT_NEAR(std::abs(overlap(singlet, gs.state)), 1.0, 1e-12);

  const auto lz = lanczos_ground_state(pair_hamiltonian(1.0));
  EXPECT_NEAR(lz.energy, -1.0, 1e-10);
  EXPECT_LE(lz.residual, 1e-8);
}

TEST(GroundState, TransverseField) {
  const AtomChain chain{{0, 3, 4, 9, 11}};
  const auto h = XYHamiltonian::transverse(chain, 1.0, std::numbers::pi / 6);
  const auto gs = ground_state(h);
  EXPECT_NEAR(gs.energy, -5.0, 1e-10);
  const auto analytic = transverse_ground_state(h);
  EXPECT_NEAR(analytic.norm(), 1.0, 1e-12);
  EXPECT_NEAR(expectation(h, analytic), -5.0, 1e-10);
  EXPECT_NEAR(residual_norm(h, analytic, -5.0), 0.0, 1e-10);

  // single atom: (|up> - e^{i phi}|down>)/sqrt2
  XYHamiltonian one;
  one.n = 1;
  one.field.push_back({0, 1.0, 0.8});
  const auto s = transverse_ground_state(one);
  EXPECT_NEAR(std::abs(s.amplitudes(0) - std::numbers::sqrt2 / 2), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s.amplitudes(1) + std::polar(std::numbers::sqrt2 / 2, 0.8)), 0.0, 1e-15);
}

TEST(GroundState, FourAtomPairing) {
  const AtomChain chain{{0, 10, 11, 21}};
  const auto gs = ground_state(XYHamiltonian::interacting(chain, 5.0, 1.0));
  const auto p = identify_pairs(gs.state);
  ASSERT_TRUE(p.complete());
  PairingReport expect;
  expect.bonds = {{1, 2, 0, 0, 0}, {0, 3, 0, 0, 1}};
  EXPECT_TRUE(same_pairing(p.report, expect));
  for (double f : p.bond_fraction) EXPECT_GT(f, 0.9);
}

TEST(GroundState, LanczosMatchesDense) {
  std::mt19937_64 rng(10);
  for (std::size_t n : {3u, 4u, 5u, 6u, 7u, 8u}) {
    const auto chain = random_chain(rng, n, 30);
    const auto h = XYHamiltonian::interacting(chain, 5.0, 1.0);
    const auto dense = dense_ground_state(h);
    const auto lz = lanczos_ground_state(h);
    EXPECT_NEAR(lz.energy, dense.energy, 1e-8) << "n = " << n;
    EXPECT_LE(lz.residual, 1e-8);
  }
}

TEST(GroundState, VariationalBound) {
  std::mt19937_64 rng(12);
  const auto chain = random_chain(rng, 8, 40);
  const auto h = XYHamiltonian::interacting(chain, 5.0, 1.0);
  const double e0 = ground_state(h).energy;
  for (std::uint64_t s = 0; s < 100; ++s) EXPECT_GE(expectation(h, random_state(8, s)), e0 - 1e-12);
}

TEST(GroundState, ResourceGuard) {
  XYHamiltonian h;
  h.n = 15;
  EXPECT_THROW(ground_state(h), InvalidParameter);
  EXPECT_THROW(dense_matrix(h), InvalidParameter);
}

TEST(Rdm, SingletTimesAnything) {
  const auto s = singlet_product(4, {{1, 3}});
  const auto r = rdm2(s, 1, 3);
  EXPECT_NEAR(r.trace(), 1.0, 1e-12);
  EXPECT_NEAR(singlet_fraction(r), 1.0, 1e-12);
  Eigen::Vector4cd S(0, std::numbers::sqrt2 / 2, -std::numbers::sqrt2 / 2, 0);
  EXPECT_LT((r.rho - S * S.adjoint()).norm(), 1e-12);
}

TEST(Rdm, PolarizedAndMixed) {
  const auto up = StateVector::basis_state(3, 0);
  const auto r = rdm2(up, 0, 2);
  EXPECT_NEAR(std::abs(r.rho(0, 0) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(r.rho.norm(), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(singlet_fraction(r), 0.0);

  Rdm2 mixed;
  mixed.rho = Eigen::Matrix4cd::Identity() / 4.0;
  EXPECT_NEAR(mixed.trace(), 1.0, 1e-15);
  EXPECT_NEAR(singlet_fraction(mixed), 0.25, 1e-15);

  // two singlets traced down to atoms from different pairs: maximally mixed
  const auto s = singlet_product(4, {{0, 1}, {2, 3}});
  const auto cross = rdm2(s, 0, 2);
  EXPECT_LT((cross.rho - Eigen::Matrix4cd::Identity() / 4.0).norm(), 1e-12);
  EXPECT_THROW(rdm2(s, 2, 2), DomainError);
}

TEST(Rdm, TracePsdAndSymmetry) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto v = random_state(5, seed);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        if (i == j) continue;
        const auto r = rdm2(v, i, j);
        EXPECT_NEAR(r.trace(), 1.0, 1e-10);
        EXPECT_LT((r.rho - r.rho.adjoint()).norm(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(r.rho);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
        EXPECT_NEAR(singlet_fraction(r), singlet_fraction(rdm2(v, j, i)), 1e-12);
      }
  }
}

TEST(Pairing, SingletProductsRoundTrip) {
  const auto s = singlet_product(4, {{0, 1}, {2, 3}});
  const auto p = identify_pairs(s);
  ASSERT_EQ(p.report.bonds.size(), 2u);
  EXPECT_TRUE(p.report.unpaired.empty());
  for (double f : p.bond_fraction) EXPECT_NEAR(f, 1.0, 1e-12);
  PairingReport expect;
  expect.bonds = {{0, 1, 0, 0, 0}, {2, 3, 0, 0, 1}};
  EXPECT_TRUE(same_pairing(p.report, expect));
}

TEST(Pairing, RsrgSingletProductsRoundTrip) {
  std::mt19937_64 rng(21);
  for (int k = 0; k < 30; ++k) {
    const auto chain = random_chain(rng, 4 + 2 * (k % 4), 60);
    const auto r = run_rsrg(chain, 5.0);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& b : r.bonds) pairs.emplace_back(b.left, b.right);
    const auto p = identify_pairs(singlet_product(chain.size(), pairs));
    EXPECT_TRUE(same_pairing(p.report, r));
    EXPECT_TRUE(p.complete());
  }
}

TEST(Pairing, PolarizedStateUnpaired) {
  const auto p = identify_pairs(StateVector::basis_state(4, 0));
  EXPECT_TRUE(p.report.bonds.empty());
  EXPECT_EQ(p.report.unpaired.size(), 4u);
  EXPECT_LE(p.fractions.maxCoeff(), 0.25);
}

TEST(SwSpectrum, DecoupledLimit) {
  const auto c = sw_effective_spectrum_check(std::vector<double>{0, 400, 401, 800}, 5.0, 1.0);
  EXPECT_LT(c.deviation, 1e-12);
}

TEST(SwSpectrum, DeviationAtTenthRatio) {
  // outer gaps chosen so that the largest pair-outer coupling is J_12 / 10
  const double gap = 1.0 + 5.0 * std::log(10.0);
  const auto c = sw_effective_spectrum_check(std::vector<double>{0, gap, gap + 1, 2 * gap + 1}, 5.0, 1.0);
  EXPECT_NEAR(c.coupling_ratio, 0.1, 1e-12);
  EXPECT_LT(c.deviation, 1e-3);
}

TEST(SwSpectrum, Preconditions) {
  EXPECT_THROW(sw_effective_spectrum_check(std::vector<double>{0, 1, 2}, 5.0, 1.0), InvalidParameter);
  EXPECT_THROW(sw_effective_spectrum_check(std::vector<double>{0, 2, 4, 6}, 5.0, 1.0), InvalidParameter);
  EXPECT_THROW(sw_effective_spectrum_check(std::vector<double>{0, 1, 5, 9}, 5.0, 1.0), InvalidParameter);
}

TEST(CollectiveSpin, SingletProductsAreSilent) {
  for (std::size_t pairs = 1; pairs <= 6; ++pairs) {
    std::vector<std::pair<std::size_t, std::size_t>> p;
    // nested and adjacent pairs mixed
    for (std::size_t k = 0; k < pairs; ++k) p.emplace_back(k, 2 * pairs - 1 - k);
    const auto s = collective_spin_stats(singlet_product(2 * pairs, p));
    for (int a = 0; a < 3; ++a) {
      EXPECT_LT(std::abs(s.mean[a]), 1e-12);
      EXPECT_LT(std::abs(s.variance[a]), 1e-12);
    }
  }
}

TEST(CollectiveSpin, PolarizedAndSingleAtom) {
  const auto s = collective_spin_stats(StateVector::basis_state(6, 0));
  EXPECT_NEAR(s.mean[2], 3.0, 1e-12);
  EXPECT_NEAR(s.variance[2], 0.0, 1e-12);
  EXPECT_NEAR(s.variance[0], 1.5, 1e-12);
  EXPECT_NEAR(s.variance[1], 1.5, 1e-12);

  StateVector plus(1);
  plus.amplitudes << std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2;
  const auto x = collective_spin_stats(plus);
  EXPECT_NEAR(x.mean[0], 0.5, 1e-15);
  EXPECT_NEAR(x.mean[1], 0.0, 1e-15);
  EXPECT_NEAR(x.mean[2], 0.0, 1e-15);
}

TEST(StateVector, PhaseConvention) {
  auto v = random_state(3, 5);
  v.amplitudes *= std::polar(1.0, 2.1);
  v.fix_global_phase();
  Eigen::Index best;
  v.amplitudes.cwiseAbs().maxCoeff(&best);
  EXPECT_NEAR(v.amplitudes(best).imag(), 0.0, 1e-15);
  EXPECT_GT(v.amplitudes(best).real(), 0.0);
}
