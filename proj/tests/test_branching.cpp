#include <lookdown/branching.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

using namespace lookdown;

namespace {
BranchingMechanism feller(double sigma2, double beta = 0.0) { return {sigma2, beta, {}}; }
BranchingMechanism jumpy() { return {0.5, 0.2, {{1.0, 1.0}, {0.3, 2.0}}}; }

double feller_cbi(double x, double l, double t) {
  const double d = 1.0 + l * t / 2.0;
  return std::exp(-x * l / d) / (d * d);
}
}  // namespace

TEST(SolveU, LinearMechanism) {
  const auto s = solve_u(feller(0.0, 1.0), 1.0, 1.0, 1e-3);
  EXPECT_NEAR(s.final(), std::exp(-1.0), 1e-12);
}

TEST(SolveU, QuadraticMechanismClosedForm) {
  const auto s = solve_u(feller(1.0), 1.0, 2.0, 1e-3);
  EXPECT_NEAR(s.final(), 0.5, 1e-10);
  for (std::size_t i = 0; i < s.t.size(); i += 97) EXPECT_NEAR(s.u[i], 1.0 / (1.0 + s.t[i] / 2.0), 1e-10);
}

TEST(SolveU, ZeroLambdaStaysZero) {
  const auto s = solve_u(jumpy(), 0.0, 3.0, 1e-2);
  for (double u : s.u) EXPECT_EQ(u, 0.0);
}

TEST(SolveU, ResidualBelowToleranceForAllMechanisms) {
  for (const auto& bm : {feller(1.0), feller(2.0, -0.2), jumpy(), BranchingMechanism{0.0, 0.1, {{2.0, 0.5}}}})
    for (double l : {0.1, 1.0, 5.0}) EXPECT_LT(solve_u(bm, l, 2.0, 1e-3).max_residual, 1e-8);
}

TEST(SolveU, FourthOrderResidualDecay) {
  for (const auto& bm : {feller(1.0), jumpy()}) {
    const double coarse = solve_u(bm, 5.0, 2.0, 0.1, 1.0).max_residual;
    const double fine = solve_u(bm, 5.0, 2.0, 0.05, 1.0).max_residual;
    EXPECT_GE(coarse / fine, 8.0);
  }
}

TEST(SolveU, ResidualViolationIsSolverFailure) {
  EXPECT_THROW(solve_u(feller(1.0), 50.0, 2.0, 0.5), SolverFailure);
}

TEST(SolveU, FlowProperty) {
  const auto bm = jumpy();
  const double l = 2.0, t = 0.7, s = 1.1;
  const double direct = solve_u(bm, l, s + t, 1e-3).final();
  const double composed = solve_u(bm, solve_u(bm, l, t, 1e-3).final(), s, 1e-3).final();
  EXPECT_NEAR(direct, composed, 1e-8);
}

TEST(Laplace, ZeroLambdaIsOne) {
  const auto bm = jumpy();
  EXPECT_EQ(cb_laplace(2.0, 0.0, 1.0, bm), 1.0);
  EXPECT_EQ(cbi_laplace(2.0, 0.0, 1.0, bm, phi_tilde(bm)), 1.0);
}

TEST(Laplace, FellerCbiClosedForm) {
  const auto bm = feller(1.0);
  for (double x : {0.0, 1.0, 2.5})
    for (double l : {0.5, 1.0, 3.0})
      for (double t : {0.3, 1.0, 2.0})
        EXPECT_NEAR(cbi_laplace(x, l, t, bm, phi_tilde(bm)), feller_cbi(x, l, t), 1e-10);
  EXPECT_NEAR(cbi_laplace(1.0, 1.0, 1.0, bm, phi_tilde(bm)), 0.2281853, 1e-7);
}

TEST(Laplace, DecreasingInLambda) {
  const auto bm = jumpy();
  double prev = 1.0;
  for (double l = 0.25; l <= 4.0; l += 0.25) {
    const double v = cb_laplace(1.0, l, 1.0, bm);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(PhiTilde, DriftIsSigmaSquaredAndLevyIsSizeWeighted) {
  const auto bm = jumpy();
  const auto phi = phi_tilde(bm);
  EXPECT_EQ(phi.drift, bm.sigma2);
  ASSERT_EQ(phi.levy.size(), bm.nuY.size());
  for (std::size_t i = 0; i < phi.levy.size(); ++i) {
    EXPECT_EQ(phi.levy[i].x, bm.nuY[i].x);
    EXPECT_EQ(phi.levy[i].w, bm.nuY[i].x * bm.nuY[i].w);
  }
}

TEST(SimulateCb, ZeroStartStaysZero) {
  Rng g = make_rng(1, 0);
  const auto p = simulate_cb(jumpy(), 0.0, 1.0, 1e-3, g);
  for (double y : p.Y) EXPECT_EQ(y, 0.0);
  EXPECT_TRUE(p.jumps.empty());
}

TEST(SimulateCb, AbsorptionIsPermanent) {
  int absorbed = 0;
  for (int r = 0; r < 300; ++r) {
    Rng g = make_rng(2, r);
    const auto p = simulate_cb(feller(1.0, 0.5), 0.3, 3.0, 1e-3, g);
    if (!p.absorbed) continue;
    ++absorbed;
    for (std::size_t i = 0; i < p.t.size(); ++i)
      if (p.t[i] >= p.absorption_time) EXPECT_EQ(p.Y[i], 0.0);
    for (const auto& j : p.jumps) EXPECT_LT(j.time, p.absorption_time);
  }
  EXPECT_GT(absorbed, 50);
}

TEST(SimulateCb, JumpsConsistentWithIncrements) {
  Rng g = make_rng(3, 0);
  const auto p = simulate_cb(jumpy(), 1.0, 2.0, 1e-3, g);
  ASSERT_FALSE(p.jumps.empty());
  for (const auto& j : p.jumps) {
    EXPECT_NEAR(j.frequency, j.size / (j.y_minus + j.size), 1e-15);
    EXPECT_FALSE(j.tagged);
  }
}

TEST(SimulateCb, MeanDecaysAtPsiPrime) {
  const auto bm = feller(1.0, 0.3);
  Accumulator acc;
  for (int r = 0; r < 10000; ++r) {
    Rng g = make_rng(4, r);
    acc.add(simulate_cb(bm, 1.0, 1.0, 1e-3, g).Y.back());
  }
  const auto e = acc.estimate();
  EXPECT_LT(std::abs(e.mean - std::exp(-0.3)), 3.0 * e.stderr_);
}

TEST(SimulateCb, MeanWithLargeJumps) {
  // atoms above 1 are not compensated: m(t) = exp(-psi'(0+) t)
  const BranchingMechanism bm{0.5, 0.4, {{1.5, 0.2}, {0.5, 1.0}}};
  Accumulator acc;
  for (int r = 0; r < 10000; ++r) {
    Rng g = make_rng(5, r);
    acc.add(simulate_cb(bm, 1.0, 1.0, 1e-3, g).Y.back());
  }
  const auto e = acc.estimate();
  EXPECT_LT(std::abs(e.mean - mean_normalizer(bm, 1.0)), 3.0 * e.stderr_);
}

TEST(SimulateCb, LaplaceMatchesOde) {
  const auto bm = jumpy();
  std::vector<double> finals;
  for (int r = 0; r < 10000; ++r) {
    Rng g = make_rng(6, r);
    finals.push_back(simulate_cb(bm, 1.0, 1.0, 1e-3, g).Y.back());
  }
  for (double l : {0.5, 1.0, 2.0}) {
    Accumulator acc;
    for (double y : finals) acc.add(std::exp(-l * y));
    const auto e = acc.estimate();
    EXPECT_LT(std::abs(e.mean - cb_laplace(1.0, l, 1.0, bm)), 3.0 * e.stderr_) << l;
  }
}

TEST(SizeBias, TimeZeroIsTrivial) {
  for (double l : {0.5, 2.0}) {
    const auto bm = feller(1.0);
    EXPECT_NEAR(cbi_laplace(1.0, l, 0.0, bm, phi_tilde(bm)), std::exp(-l), 1e-15);
    EXPECT_NEAR(cb_laplace(1.0, l, 0.0, bm), std::exp(-l), 1e-15);
  }
}

TEST(SizeBias, FellerThreeWay) {
  BranchingRunOptions opt;
  opt.seed = 7;
  opt.replicas = 10000;
  const auto rep = size_bias_check(feller(1.0), 1.0, 1.0, {1.0}, opt);
  EXPECT_TRUE(rep.all_pass());
}

TEST(SizeBias, SupercriticalWithJumps) {
  BranchingRunOptions opt;
  opt.seed = 8;
  opt.replicas = 10000;
  const BranchingMechanism bm{1.0, -0.2, {{0.5, 1.0}}};
  const auto rep = size_bias_check(bm, 1.0, 1.0, {0.5, 1.0, 2.0}, opt);
  for (const auto& v : rep.verdicts) EXPECT_TRUE(v.pass) << v.check << " z=" << v.statistic;
}

TEST(TaggedJumps, SingleAtom) {
  EXPECT_NEAR(tagged_exponent({0.0, 0.0, {{1.0, 1.0}}}, 1.0), 1.0 - std::exp(-1.0), 1e-15);
  BranchingRunOptions opt;
  opt.seed = 9;
  opt.replicas = 10000;
  const auto rep = tagged_jump_test({1.0, 0.0, {{1.0, 1.0}}}, 1.0, 1.0, {0.0, 0.5, 1.0, 2.0}, opt);
  for (const auto& v : rep.verdicts) EXPECT_TRUE(v.pass) << v.check << " z=" << v.statistic;
}

TEST(TaggedJumps, NoJumpsMeansNoTags) {
  Rng g = make_rng(10, 0);
  EXPECT_EQ(tagged_sum(simulate_cbi(feller(1.0), 1.0, 1.0, 1e-3, g)), 0.0);
}

TEST(PathCsv, HasHeaderAndRows) {
  Rng g = make_rng(11, 0);
  const auto p = simulate_cbi(jumpy(), 1.0, 0.01, 1e-3, g);
  std::ostringstream os;
  write_mass_path_csv(os, p);
  EXPECT_EQ(os.str().rfind("time,Y,jump_size,tagged\n", 0), 0u);
}
