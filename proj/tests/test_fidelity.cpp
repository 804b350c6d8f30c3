#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "rsp/fidelity.hpp"

using namespace rsp;

namespace {

// decays like a real survival curve, start 1 at 0.2 and flat beyond 12
SurvivalCurve toy_curve() {
  SurvivalCurve c;
  for (double x = 0.2; x <= 12.0 + 1e-9; x += 0.05) {
    c.lm_over_l.push_back(x);
    c.survival.push_back(std::exp(-0.6 * (x - 0.2)));
  }
  return c;
}

}  // namespace

TEST(PInc, Values) {
  FidelityParams p;
  EXPECT_NEAR(p_inc(std::numbers::pi / 20.0, p), 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(p_inc(std::numbers::pi / 200.0, p), 1.0);
  EXPECT_DOUBLE_EQ(p_inc(1e-6, p), 1.0);
  EXPECT_LT(p_inc(1e8, p), 1e-9);
  EXPECT_DOUBLE_EQ(p_inc(std::numeric_limits<double>::infinity(), p), 0.0);
  EXPECT_THROW(p_inc(0.0, p), InvalidParameter);
}

TEST(FUnpaired, CutoffMapping) {
  FidelityParams p;
  const auto c = toy_curve();
  EXPECT_NEAR(f_unpaired(std::exp(-4.0), p, c), c.at(4.0), 1e-15);
  EXPECT_NEAR(f_unpaired(std::exp(-4.0), p, c), std::exp(-0.6 * 3.8), 1e-3);
  EXPECT_DOUBLE_EQ(f_unpaired(1.0, p, c), 1.0);
  EXPECT_DOUBLE_EQ(f_unpaired(5.0, p, c), 1.0);
  EXPECT_LT(f_unpaired(1e-12, p, c), 1e-3);
  double prev = 0.0;
  for (double w = 1e-8; w < 10.0; w *= 1.3) {
    const double f = f_unpaired(w, p, c);
    EXPECT_GE(f, prev);
    prev = f;
  }
  EXPECT_THROW(f_unpaired(0.1, p, SurvivalCurve{}), DependencyError);
}

TEST(Optimize, ArgmaxAndDecomposition) {
  FidelityParams p;
  const auto c = toy_curve();
  const auto grid = log_grid(1e-6, 10.0, 20);
  const auto opt = optimize_f_paired(p, c, grid);
  for (const auto& pt : opt.table) {
    EXPECT_GE(opt.f_paired_star, pt.f_paired);
    EXPECT_GE(pt.f_paired, 0.0);
    EXPECT_LE(pt.f_paired, 1.0);
    EXPECT_DOUBLE_EQ(pt.f_paired, (1.0 - pt.f_unpaired) * (1.0 - pt.p_inc));
    EXPECT_DOUBLE_EQ(pt.f_paired, f_paired(pt.omega, p, c));
  }
  EXPECT_DOUBLE_EQ(opt.omega_star, grid[opt.index]);
  EXPECT_EQ(opt.unimodality_violations, 0u);
}

TEST(Optimize, NoLossLimit) {
  FidelityParams p;
  p.cooperativity = 1e40;
  const auto opt = optimize_f_paired(p, toy_curve(), log_grid(1e-8, 10.0, 10));
  EXPECT_GT(opt.f_paired_star, 0.99);
}

TEST(Optimize, GridRefinementStable) {
  FidelityParams p;
  const auto c = toy_curve();
  const auto a = optimize_f_paired(p, c, log_grid(1e-6, 10.0, 40));
  const auto b = optimize_f_paired(p, c, log_grid(1e-6, 10.0, 80));
  EXPECT_LT(std::abs(a.f_paired_star - b.f_paired_star) / b.f_paired_star, 1e-2);
}

TEST(Optimize, BadInputs) {
  FidelityParams p;
  EXPECT_THROW(optimize_f_paired(p, toy_curve(), {}), InvalidParameter);
  EXPECT_THROW(optimize_f_paired(p, toy_curve(), log_grid(1e-2, 10.0, 10)), InvalidParameter);
  EXPECT_THROW(optimize_f_paired(p, SurvivalCurve{}, log_grid(1e-6, 10.0, 10)), DependencyError);
  p.cooperativity = 0.0;
  EXPECT_THROW(optimize_f_paired(p, toy_curve(), log_grid(1e-6, 10.0, 10)), InvalidParameter);
}
