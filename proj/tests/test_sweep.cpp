#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "rsp/sweep.hpp"

using namespace rsp;

namespace {

double fidelity(const StateVector& a, const StateVector& b) { return std::norm(overlap(a, b)); }

StateVector ground_of_interaction(const AtomChain& chain, const SweepParams& p) {
  return ground_state(XYHamiltonian::interacting(chain, p.interaction_range, p.j0)).state;
}

}  // namespace

TEST(Krylov, PropagatorMatchesDenseExponential) {
  std::mt19937_64 rng(3);
  LatticeParams lp;
  lp.n_sites = 30;
  lp.filling = FixedCount{6};
  const auto chain = sample_chain(lp, rng);
  SweepParams sp;
  const auto h = sweep_hamiltonian(chain, sp);
  const Eigen::MatrixXcd H = dense_matrix(h);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  const CVector v = random_start(H.rows(), 9);
  for (double dt : {0.01, 0.3, 1.5}) {
    const Eigen::VectorXcd phases =
        (es.eigenvalues().cast<cplx>() * cplx(0.0, -dt)).array().exp().matrix();
    const CVector exact = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint() * v;
    CVector out;
    const auto r = propagate([&](const CVector& in, CVector& o) { apply_scaled(h, in, o); }, v, dt,
                             out, 1e-12);
    EXPECT_TRUE(r.converged);
    EXPECT_LT((out - exact).norm(), 1e-10) << "dt = " << dt;
    EXPECT_NEAR(out.norm(), 1.0, 1e-12);
  }
}

TEST(Sweep, EndpointsOfTheSchedule) {
  const AtomChain chain{{0, 2, 7, 8}};
  SweepParams p;
  const auto h = sweep_hamiltonian(chain, p);
  const auto h0 = XYHamiltonian::transverse(chain, p.epsilon0, p.phi0);
  const auto hint = XYHamiltonian::interacting(chain, p.interaction_range, p.j0);
  ASSERT_EQ(h.field.size(), h0.field.size());
  for (std::size_t k = 0; k < h.field.size(); ++k) {
    EXPECT_DOUBLE_EQ(h.field[k].phi, h0.field[k].phi);
    EXPECT_DOUBLE_EQ(h.field[k].epsilon, h0.field[k].epsilon);
  }
  ASSERT_EQ(h.couplings.size(), hint.couplings.size());
  for (std::size_t k = 0; k < h.couplings.size(); ++k)
    EXPECT_DOUBLE_EQ(h.couplings[k].value, hint.couplings[k].value);

  const auto psi0 = transverse_ground_state(h);
  EXPECT_NEAR(expectation(h0, psi0), -4.0 * p.epsilon0, 1e-10);
  EXPECT_NEAR(residual_norm(h0, psi0, -4.0), 0.0, 1e-10);
}

TEST(Sweep, NormDriftSmall) {
  std::mt19937_64 rng(17);
  LatticeParams lp;
  lp.n_sites = 40;
  lp.filling = FixedCount{6};
  SweepParams p;
  p.omega = 0.05;
  const auto r = evolve(sample_chain(lp, rng), p);
  EXPECT_LT(r.stats.norm_drift, 1e-8);
  EXPECT_GT(r.stats.accepted, 0u);
}

TEST(Sweep, MatchesTighterReference) {
  std::mt19937_64 rng(23);
  LatticeParams lp;
  lp.n_sites = 40;
  lp.filling = FixedCount{6};
  const auto chain = sample_chain(lp, rng);
  SweepParams p;
  p.omega = 0.1;
  const auto a = evolve(chain, p);
  SweepParams ref = p;
  ref.tolerance = p.tolerance / 100.0;
  const auto b = evolve(chain, ref);
  EXPECT_LT((a.state.amplitudes - b.state.amplitudes).norm(), 10.0 * p.tolerance);
}

TEST(Sweep, AdiabaticAndSuddenLimits) {
  const AtomChain pair{{0, 3}};
  SweepParams p;
  p.omega = 1e-4;
  const auto slow = evolve(pair, p);
  EXPECT_GE(fidelity(slow.state, ground_of_interaction(pair, p)), 0.99);

  p.omega = 1e4;
  const auto fast = evolve(pair, p);
  const auto psi0 = transverse_ground_state(sweep_hamiltonian(pair, p));
  EXPECT_GE(fidelity(fast.state, psi0), 0.99);
}

TEST(Sweep, InfidelityEnvelopeGrowsWithRate) {
  const AtomChain pair{{0, 4}};
  SweepParams p;
  const auto gs = ground_of_interaction(pair, p);
  const auto grid = log_grid(1e-3, 10.0, 5);
  double envelope = 0.0;
  std::vector<double> infid;
  for (double w : grid) {
    p.omega = w;
    const double x = 1.0 - fidelity(evolve(pair, p).state, gs);
    envelope = std::max(envelope, x);
    infid.push_back(envelope);
  }
  for (std::size_t k = 1; k < infid.size(); ++k) EXPECT_GE(infid[k], infid[k - 1]);
  EXPECT_LT(infid.front(), 0.01);
  EXPECT_GT(infid.back(), 0.3);
}

TEST(Sweep, StepUnderflowIsReported) {
  SweepParams p;
  p.omega = 1e-3;
  p.min_step = 0.5;
  EXPECT_THROW(evolve(AtomChain{{0, 1, 5}}, p), StepSizeError);
}

TEST(Sweep, ParameterChecks) {
  SweepParams p;
  p.omega = 0.0;
  EXPECT_THROW(p.validate(), InvalidParameter);
  p.omega = 0.1;
  p.phi0 = 7.0;
  EXPECT_THROW(p.validate(), InvalidParameter);
  p.phi0 = 0.3;
  p.max_atoms = 3;
  EXPECT_THROW(evolve(AtomChain{{0, 1, 2, 3}}, p), InvalidParameter);
}

TEST(LogGrid, Shape) {
  const auto g = log_grid(1e-4, 10.0, 40);
  EXPECT_EQ(g.size(), 201u);
  EXPECT_DOUBLE_EQ(g.front(), 1e-4);
  EXPECT_NEAR(g.back(), 10.0, 1e-12);
  for (std::size_t k = 1; k < g.size(); ++k) EXPECT_NEAR(g[k] / g[k - 1], std::pow(10.0, 0.025), 1e-12);
  EXPECT_THROW(log_grid(0.0, 1.0, 10), InvalidParameter);
}

TEST(Scan, TwoAtomStrongerBreaksLater) {
  const auto grid = log_grid(1e-4, 10.0, 20);
  SweepParams p;
  std::vector<SweepRecord> recs;
  for (int d : {1, 3, 10}) {
    const auto r = bond_break_scan(AtomChain{{0, d}}, grid, p);
    ASSERT_EQ(r.records.size(), 1u);
    EXPECT_NEAR(r.records[0].j_eff, std::exp(-d / 5.0), 1e-12);
    EXPECT_TRUE(r.baseline_ok);
    EXPECT_GE(r.ground_overlap.front(), 0.99);
    recs.push_back(r.records[0]);
  }
  for (const auto& r : recs) ASSERT_TRUE(r.uncensored());
  EXPECT_GT(recs[0].omega_break, recs[2].omega_break);
  LzFitOptions loose;
  loose.min_records = 3;
  loose.min_decades = 0.5;
  EXPECT_GT(lz_fit(recs, loose).slope, 0.0);
}

TEST(Scan, DenserGridMovesBreakByAtMostOneCell) {
  SweepParams p;
  const AtomChain pair{{0, 2}};
  const auto coarse_grid = log_grid(1e-3, 10.0, 10);
  const auto fine_grid = log_grid(1e-3, 10.0, 20);
  const auto a = bond_break_scan(pair, coarse_grid, p).records[0];
  const auto b = bond_break_scan(pair, fine_grid, p).records[0];
  ASSERT_TRUE(a.uncensored() && b.uncensored());
  const double cell = std::pow(10.0, 0.1);
  EXPECT_LE(a.omega_break / b.omega_break, cell * (1 + 1e-9));
  EXPECT_GE(a.omega_break / b.omega_break, 1.0 / cell / (1 + 1e-9));
}

TEST(Scan, CensoringFlags) {
  SweepParams p;
  // J_eff = e^{-2} sits below every scanned rate
  const auto grid = log_grid(0.5, 10.0, 10);
  ScanOptions opt;
  EXPECT_THROW(bond_break_scan(AtomChain{{0, 10}}, grid, p, opt), BaselineError);
  opt.require_baseline = false;
  const auto r = bond_break_scan(AtomChain{{0, 10}}, grid, p, opt);
  EXPECT_FALSE(r.baseline_ok);
  EXPECT_EQ(r.records[0].censored, Censoring::BelowGrid);
  EXPECT_FALSE(r.records[0].uncensored());

  // a strong bond that survives every rate on a short grid
  const auto slow = log_grid(1e-3, 1e-2, 10);
  const auto never = bond_break_scan(AtomChain{{0, 1}}, slow, p);
  EXPECT_EQ(never.records[0].censored, Censoring::NeverBroke);
  EXPECT_TRUE(std::isnan(never.records[0].omega_break));
}

TEST(LzFit, ExactPowerLaw) {
  std::vector<SweepRecord> recs;
  for (int k = 0; k < 12; ++k) {
    SweepRecord r;
    r.j_eff = std::pow(10.0, -3.0 + 0.25 * k);
    r.omega_break = 0.37 * r.j_eff;
    recs.push_back(r);
  }
  const auto f = lz_fit(recs);
  EXPECT_NEAR(f.slope, 1.0, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(0.37), 1e-12);
  EXPECT_NEAR(f.spread, 0.0, 1e-12);
  EXPECT_EQ(f.count, 12u);

  auto censored = recs;
  censored[0].censored = Censoring::NeverBroke;
  censored[0].omega_break = 1e9;
  EXPECT_NEAR(lz_fit(censored).slope, 1.0, 1e-12);
}

TEST(LzFit, RangeGuards) {
  std::vector<SweepRecord> few(5);
  for (std::size_t k = 0; k < few.size(); ++k) {
    few[k].j_eff = std::pow(10.0, -static_cast<double>(k));
    few[k].omega_break = few[k].j_eff;
  }
  EXPECT_THROW(lz_fit(few), FitRangeError);
  std::vector<SweepRecord> narrow(20);
  for (std::size_t k = 0; k < narrow.size(); ++k) {
    narrow[k].j_eff = 0.1 * (1.0 + 0.01 * static_cast<double>(k));
    narrow[k].omega_break = narrow[k].j_eff;
  }
  EXPECT_THROW(lz_fit(narrow), FitRangeError);
}
