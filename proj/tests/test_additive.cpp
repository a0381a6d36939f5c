#include <lookdown/additive.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace lookdown;

namespace {
const FiniteChain kFlip{{{-1.0, 1.0}, {1.0, -1.0}}};

AdditiveConfig two_state(HarmonicPair h, long N = 40) {
  AdditiveConfig c;
  c.spec = {1.0, NuSpec::none()};
  c.mutation = kFlip;
  c.h = std::move(h);
  c.R0 = InitialLaw::dirichlet({1.0, 1.0});
  c.N = N;
  return c;
}

AdditiveOptions opts(std::uint64_t seed, std::size_t reps) {
  AdditiveOptions o;
  o.seed = seed;
  o.replicas = reps;
  return o;
}

void expect_all_pass(const TestReport& rep) {
  for (const auto& v : rep.verdicts) EXPECT_TRUE(v.pass) << v.check << " z=" << v.statistic;
}
}  // namespace

TEST(HarmonicPair, EigenPairIsValidated) {
  EXPECT_THROW(HarmonicPair::eigen(kFlip, {2.0, 1.0}, -0.5), ConfigError);
  EXPECT_THROW(HarmonicPair::eigen(kFlip, {1.0, -1.0}, -2.0), ConfigError);
  EXPECT_NO_THROW(HarmonicPair::eigen(kFlip, {1.0, 1.0}, 0.0));
  const FiniteChain biased{{{-2.0, 2.0}, {1.0, -1.0}}};
  EXPECT_NO_THROW(HarmonicPair::eigen(biased, {3.0, 3.0}, 0.0));
}

TEST(HarmonicPair, TerminalValueSolvesBackwardEquation) {
  const auto h = HarmonicPair::terminal_value(kFlip, {2.0, 1.0}, 1.0);
  const auto end = h.finite_vector(1.0, 2);
  EXPECT_NEAR(end[0], 2.0, 1e-14);
  EXPECT_NEAR(end[1], 1.0, 1e-14);
  // exp(sA)(2,1) = 1.5 + 0.5 e^{-2s} (1,-1)
  const auto mid = h.finite_vector(0.25, 2);
  EXPECT_NEAR(mid[0], 1.5 + 0.5 * std::exp(-1.5), 1e-13);
  EXPECT_NEAR(mid[1], 1.5 - 0.5 * std::exp(-1.5), 1e-13);
  EXPECT_THROW(h.finite_vector(1.5, 2), ConfigError);
  EXPECT_DOUBLE_EQ(h.ratio_bound(), 2.0);
}

TEST(HarmonicPair, ExponentialFamily) {
  const auto h = HarmonicPair::exponential(BrownianMotion{2.0}, 0.5);
  EXPECT_NEAR(h.scalar(1.0, 1.0), std::exp(0.5 - 0.25), 1e-15);
}

TEST(Additive, ZeroInitialWeightIsConfigError) {
  AdditiveConfig c = two_state(HarmonicPair::constant());
  c.cb = BranchingMechanism{1.0, 0.0, {}};
  c.x0 = 0.0;
  Rng g = make_rng(1, 0);
  EXPECT_THROW(run_additive<Alphabet>(c, true, {0.5}, g), ConfigError);
}

TEST(Additive, ConstantHGivesUnitT) {
  const auto c = two_state(HarmonicPair::constant());
  Rng g = make_rng(2, 0);
  const auto rec = run_additive<Alphabet>(c, false, {0.0, 0.5, 1.0}, g);
  for (double w : weight_T(c, rec)) EXPECT_DOUBLE_EQ(w, 1.0);
}

TEST(Additive, InitialSHasMeanOne) {
  auto c = two_state(HarmonicPair::terminal_value(kFlip, {2.0, 1.0}, 1.0));
  c.R0 = InitialLaw::deterministic({0.3, 0.7});
  Accumulator acc;
  for (int r = 0; r < 20000; ++r) {
    Rng g = make_rng(3, r);
    acc.add(weight_S(c, run_additive<Alphabet>(c, false, {0.0}, g))[0]);
  }
  const auto e = acc.estimate();
  EXPECT_LT(std::abs(e.mean - 1.0), 3.0 * e.stderr_);
}

TEST(Additive, TwoStateMartingales) {
  const auto c = two_state(HarmonicPair::terminal_value(kFlip, {2.0, 1.0}, 1.0));
  expect_all_pass(additive_martingale_check<Alphabet>(c, {0.5, 1.0}, opts(4, 4000)));
}

TEST(Additive, TwoStateEquality) {
  const auto c = two_state(HarmonicPair::terminal_value(kFlip, {2.0, 1.0}, 1.0));
  expect_all_pass(verify_additive_equality<Alphabet>(c, additive_test_family(2), 0.5, opts(5, 4000)));
}

TEST(Additive, FirstLevelBias) {
  const auto c = two_state(HarmonicPair::terminal_value(kFlip, {2.0, 1.0}, 1.0));
  const auto rep = first_level_bias_check(c, 0.5, opts(6, 4000));
  expect_all_pass(rep);
  // level 1 over-represents the type with larger h
  double p1 = 0.0, r1 = 0.0;
  for (const auto& e : rep.estimates) {
    if (e.name == "P(level 1 = a) type 1") p1 = e.value;
    if (e.name == "E[R{a}] type 1") r1 = e.value;
  }
  EXPECT_GT(p1, r1);
}

TEST(Additive, ConstantHReproducesPlainLaw) {
  const auto c = two_state(HarmonicPair::constant());
  const auto opt = opts(7, 3000);
  std::vector<double> a, b;
  for (const auto& r : additive_ensemble<Alphabet>(c, true, {0.5}, opt, 0)) a.push_back(r.snaps[0].freq(1));
  for (const auto& r : additive_ensemble<Alphabet>(c, false, {0.5}, opt, 0)) b.push_back(r.snaps[0].freq(1));
  EXPECT_GT(two_sample_ks(a, b).p_value, 0.01);
}

TEST(Additive, CbModeMassIsCbi) {
  AdditiveConfig c = two_state(HarmonicPair::constant(), 20);
  c.cb = BranchingMechanism{1.0, 0.0, {{0.5, 1.0}}};
  c.x0 = 1.0;
  const auto recs = additive_ensemble<Alphabet>(c, true, {1.0}, opts(8, 4000), 0);
  for (double l : {0.5, 1.0}) {
    Accumulator acc;
    for (const auto& r : recs) acc.add(std::exp(-l * r.snaps[0].Y));
    const auto e = acc.estimate();
    EXPECT_LT(std::abs(e.mean - cbi_laplace(1.0, l, 1.0, *c.cb, phi_tilde(*c.cb))), 3.0 * e.stderr_);
  }
  for (const auto& r : recs) EXPECT_GT(r.snaps[0].Y, 0.0);
}

TEST(Additive, CbModeEquality) {
  AdditiveConfig c = two_state(HarmonicPair::terminal_value(kFlip, {2.0, 1.0}, 1.0), 20);
  c.cb = BranchingMechanism{1.0, 0.2, {{0.5, 1.0}}};
  c.x0 = 1.0;
  expect_all_pass(verify_additive_equality<Alphabet>(c, additive_test_family(2), 0.5, opts(9, 4000)));
}

TEST(Additive, BrownianExponentialMartingales) {
  AdditiveConfig c;
  c.spec = {1.0, NuSpec::none()};
  c.mutation = BrownianMotion{1.0};
  c.h = HarmonicPair::exponential(BrownianMotion{1.0}, 0.7);
  c.N = 30;
  expect_all_pass(additive_martingale_check<double>(c, {0.5, 1.0}, opts(10, 4000)));
}

TEST(Blocks, BernoulliLevelsFrequency) {
  Rng g = make_rng(11, 0);
  std::vector<long> block;
  long total = 0;
  for (int r = 0; r < 2000; ++r) {
    block.clear();
    sample_bernoulli_levels(0.1, 2, 101, g, block);
    for (std::size_t i = 1; i < block.size(); ++i) ASSERT_LT(block[i - 1], block[i]);
    if (!block.empty()) {
      ASSERT_GE(block.front(), 2);
      ASSERT_LE(block.back(), 101);
    }
    total += static_cast<long>(block.size());
  }
  EXPECT_NEAR(total / 2000.0, 10.0, 0.3);
}

TEST(Additive, UnbiasedFirstLevelFailsBiasPrediction) {
  // negative control: the plain construction does not satisfy the h-biased law
  const auto target = two_state(HarmonicPair::terminal_value(kFlip, {2.0, 1.0}, 1.0));
  const auto plain = two_state(HarmonicPair::constant());
  Accumulator diff;
  for (const auto& rec : additive_ensemble<Alphabet>(plain, true, {0.5}, opts(12, 4000), 0)) {
    const auto& s = rec.snaps[0];
    const double pred = h_at<Alphabet>(target, s.time, 1) * s.freq(1) / empirical_h(target, s, rec.N);
    diff.add((s.x1 == 1) - pred);
  }
  const auto e = diff.estimate();
  EXPECT_GT(std::abs(e.mean), 3.0 * e.stderr_);
}
