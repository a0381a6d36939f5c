#include <lookdown/product_htransform.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace lookdown;

namespace {
LambdaSpec kingman(double c) { return {c, NuSpec::none()}; }
const InitialLaw kHalf = InitialLaw::deterministic({0.5, 0.5});

TrajectoryRecord<Alphabet> record_from(const std::vector<std::vector<Alphabet>>& states,
                                       const std::vector<double>& times, long K) {
  TrajectoryRecord<Alphabet> rec;
  rec.N = static_cast<long>(states[0].size());
  RecordOptions o;
  o.designated_K = K;
  o.alphabet = 2;
  for (std::size_t i = 0; i < states.size(); ++i) rec.snaps.push_back(take_snapshot(times[i], 1.0, states[i], o));
  return rec;
}
}  // namespace

TEST(Weights, ProbabilityOfFirstLevelsBeingDesignated) {
  EXPECT_DOUBLE_EQ(prob_L0_equals_K(kHalf, 2), 0.5);
  EXPECT_NEAR(prob_L0_equals_K(InitialLaw::dirichlet({2.0, 2.0}), 2), 2.0 * (2.0 / 4.0) * (2.0 / 5.0), 1e-15);
}

TEST(Weights, ProjectionIsExactFallingFactorial) {
  // N = 4, two of each type: P(levels 1,2 carry types 1,2) = 2 * 2*2 / (4*3)
  EXPECT_NEAR(designated_projection({0, 2, 2}, 2, 4), 8.0 / 12.0, 1e-15);
}

TEST(Weights, ProjectionAveragesToProductMoment) {
  // For iid levels the projection has mean K! prod p_i, so E[M_0] = 1.
  Accumulator acc;
  for (int r = 0; r < 20000; ++r) {
    Rng g = make_rng(1, r);
    const auto s = init_exchangeable(kHalf, 10, g);
    acc.add(weight_M(record_from({s.types}, {0.0}, 2), 2, kingman(1.0), kHalf)[0]);
  }
  const auto e = acc.estimate();
  EXPECT_LT(std::abs(e.mean - 1.0), 3.0 * e.stderr_);
}

TEST(Weights, ExtinctDesignatedTypeGivesZero) {
  const auto rec = record_from({{1, 1, 1, 1}}, {0.7}, 2);
  EXPECT_EQ(weight_M(rec, 2, kingman(1.0), kHalf)[0], 0.0);
  EXPECT_EQ(weight_Q(rec, 2, kingman(1.0), kHalf)[0], 0.0);
}

TEST(Weights, QTakesTwoValues) {
  const auto rec = record_from({{1, 2, 1, 1}, {2, 1, 2, 2}, {1, 1, 2, 2}}, {0.0, 0.5, 1.0}, 2);
  const auto q = weight_Q(rec, 2, kingman(1.0), kHalf);
  EXPECT_DOUBLE_EQ(q[0], 2.0);
  EXPECT_DOUBLE_EQ(q[1], 2.0 * std::exp(0.5));
  EXPECT_EQ(q[2], 0.0);
}

TEST(Weights, OverCapGivesZeroQ) {
  const auto rec = record_from({{1, 1, 1, 1}}, {0.0}, 2);
  EXPECT_EQ(rec.snaps[0].L, kOverCap);
  EXPECT_EQ(weight_Q(rec, 2, kingman(1.0), kHalf)[0], 0.0);
}

TEST(Martingales, KingmanMeanOneAndProjection) {
  HtransformOptions opt;
  opt.seed = 2;
  opt.replicas = 4000;
  opt.N = 40;
  const auto rep = martingale_check(kingman(1.0), 2, kHalf, {0.25, 0.5, 1.0}, opt);
  for (const auto& v : rep.verdicts) EXPECT_TRUE(v.pass) << v.check << " z=" << v.statistic;
}

TEST(Martingales, BetaMeanOne) {
  HtransformOptions opt;
  opt.seed = 3;
  opt.replicas = 3000;
  opt.N = 30;
  const auto rep = martingale_check({0.0, NuSpec::beta(1.5)}, 2, InitialLaw::dirichlet({1.0, 1.0, 1.0}), {0.2, 0.5}, opt);
  for (const auto& v : rep.verdicts) EXPECT_TRUE(v.pass) << v.check << " z=" << v.statistic;
}

TEST(Htransform, TimeZeroAgrees) {
  HtransformOptions opt;
  opt.seed = 4;
  opt.replicas = 4000;
  opt.N = 30;
  const auto rep = verify_htransform_equality(kingman(1.0), 2, kHalf, 0.0, product_test_family(), opt);
  for (const auto& v : rep.verdicts) EXPECT_TRUE(v.pass) << v.check << " z=" << v.statistic;
}

TEST(Htransform, SymmetryGivesHalf) {
  HtransformOptions opt;
  opt.seed = 5;
  opt.replicas = 3000;
  opt.N = 30;
  const auto xs = restricted_marginal(kingman(1.0), 2, kHalf, 0.5, opt);
  const auto e = mc_estimate(xs);
  EXPECT_LT(std::abs(e.mean - 0.5), 3.0 * e.stderr_);
}

TEST(Htransform, FamilyAgreesAtHalf) {
  HtransformOptions opt;
  opt.seed = 6;
  opt.replicas = 4000;
  opt.N = 30;
  const auto rep = verify_htransform_equality(kingman(1.0), 2, kHalf, 0.5, product_test_family(), opt);
  for (const auto& v : rep.verdicts) EXPECT_TRUE(v.pass) << v.check << " z=" << v.statistic;
}

TEST(Htransform, RestrictedRunsKeepDesignatedTypesOnTop) {
  Rng g = make_rng(7, 0);
  RecordOptions o;
  o.designated_K = 3;
  o.alphabet = 3;
  const auto R0 = InitialLaw::dirichlet({1.0, 1.0, 1.0});
  for (int r = 0; r < 50; ++r) {
    const auto rec = run_gfv<Alphabet>(kingman(1.0), NoMutation{}, init_product_h(3, R0, 20, g), 2.0,
                                       {0.0, 0.5, 1.0, 2.0}, 3, g, o);
    for (const auto& s : rec.snaps) EXPECT_EQ(s.L, 3);
  }
}

TEST(Conditioned, TrivialWhenAllTypesPresent) {
  Rng g = make_rng(8, 0);
  const auto c = conditioned_sampler(kingman(1.0), 2, kHalf, 0.0, 0.0, 100, g);
  EXPECT_EQ(c.attempts, 1);
}

TEST(Conditioned, SymmetricMeanIsHalf) {
  HtransformOptions opt;
  opt.seed = 9;
  opt.replicas = 2000;
  opt.N = 30;
  const auto e = conditioned_ensemble(kingman(1.0), 2, kHalf, 1.0, 0.5, opt);
  const auto m = mc_estimate(e.values);
  EXPECT_LT(std::abs(m.mean - 0.5), 3.0 * m.stderr_);
  EXPECT_GT(e.acceptance, 0.0);
  EXPECT_LE(e.acceptance, 1.0);
}

TEST(Conditioned, InfeasibleIsReported) {
  Rng g = make_rng(10, 0);
  // Two types coexisting among 10 levels up to t=50 is far rarer than the floor.
  EXPECT_THROW(conditioned_sampler(kingman(1.0), 2, InitialLaw::dirichlet({1.0, 1.0}), 50.0, 0.0, 10, g, 0.05),
               InfeasibleConditioning);
}

TEST(Conditioned, BadWindowIsConfigError) {
  Rng g = make_rng(11, 0);
  EXPECT_THROW(conditioned_sampler(kingman(1.0), 2, kHalf, 1.0, 2.0, 10, g), ConfigError);
}

TEST(Coexistence, KingmanPartialSumsTelescope) {
  for (long J : {2L, 10L, 100L}) EXPECT_NEAR(inverse_rate_partial_sum(kingman(1.0), 2, J), 2.0 * (1.0 - 1.0 / J), 1e-12);
}

TEST(Coexistence, RatiosLieInUnitInterval) {
  HtransformOptions opt;
  opt.seed = 12;
  opt.replicas = 2000;
  opt.N = 20;
  const auto rows = coexistence_rows(kingman(1.0), 2, {0.1, 0.5, 1.0}, 20, opt);
  for (const auto& r : rows) {
    EXPECT_GE(r.ratio.mean, 0.0);
    EXPECT_LE(r.ratio.mean, 1.0);
    EXPECT_NEAR(r.exact_stay, std::exp(-r.t), 1e-15);
  }
}
