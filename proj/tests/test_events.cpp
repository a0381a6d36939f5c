#include <lookdown/events.hpp>

#include <gtest/gtest.h>

#include <boost/math/constants/constants.hpp>

#include <cmath>
#include <map>
#include <set>
#include <vector>

using namespace lookdown;

namespace {
struct Moments {
  double n = 0, sum = 0, sum2 = 0;
  void add(double x) {
    ++n;
    sum += x;
    sum2 += x * x;
  }
  double mean() const { return sum / n; }
  double se() const { return std::sqrt((sum2 / n - mean() * mean()) / (n - 1)); }
};
}  // namespace

TEST(Relabel, Examples) {
  EXPECT_EQ(relabel_level(2, {1, 3}), 2);
  EXPECT_EQ(relabel_level(2, {1, 2}), 3);
  EXPECT_EQ(relabel_level(1, {1, 5}), 1);
}

TEST(Relabel, KingmanPairRule) {
  for (long a = 1; a <= 6; ++a)
    for (long b = a + 1; b <= 7; ++b)
      for (long l = 1; l <= 12; ++l) {
        if (l == a) continue;
        EXPECT_EQ(relabel_level(l, {a, b}), l < b ? l : l + 1);
      }
}

TEST(Relabel, ImagesPartitionEveryWindow) {
  Rng g = make_rng(3, 0);
  std::vector<long> block;
  for (int rep = 0; rep < 300; ++rep) {
    const long N = 2 + rep % 15;
    sample_conditioned_block(0.05 + 0.9 * uniform01(g), N, g, block);
    for (long M = block.back(); M <= N + 5; ++M) {
      std::set<long> seen(block.begin(), block.end());
      long prev = 0;
      for (long old = 1; old <= M; ++old) {
        if (old == block.front()) continue;
        const long nl = relabel_level(old, block);
        EXPECT_GE(nl, old);
        EXPECT_GT(nl, prev);
        prev = nl;
        if (nl <= M) EXPECT_TRUE(seen.insert(nl).second);
      }
      for (long k = 1; k <= M; ++k) EXPECT_TRUE(seen.count(k)) << "hole at " << k;
    }
  }
}

TEST(Stream, KingmanPairOnlyAtTwoLevels) {
  Rng g = make_rng(5, 0);
  const auto s = sample_event_stream({1.0, NuSpec::none()}, 2, 50.0, g);
  EXPECT_GT(s.events.size(), 20u);
  for (const auto& ev : s.events) {
    EXPECT_EQ(ev.block, (std::vector<long>{1, 2}));
    EXPECT_EQ(ev.kind, EventKind::Kingman);
  }
}

TEST(Stream, DegenerateSpecIsEmpty) {
  Rng g = make_rng(5, 1);
  EXPECT_TRUE(sample_event_stream(LambdaSpec{}, 10, 100.0, g).events.empty());
}

TEST(Stream, InvariantsOfBlocksAndTimes) {
  Rng g = make_rng(5, 2);
  const auto s = sample_event_stream({0.5, NuSpec::beta(1.5)}, 30, 2.0, g);
  double prev = 0.0;
  for (const auto& ev : s.events) {
    EXPECT_GT(ev.time, prev);
    EXPECT_LE(ev.time, 2.0);
    prev = ev.time;
    ASSERT_GE(ev.block.size(), 2u);
    if (ev.kind == EventKind::Kingman) EXPECT_EQ(ev.block.size(), 2u);
    for (std::size_t i = 1; i < ev.block.size(); ++i) EXPECT_LT(ev.block[i - 1], ev.block[i]);
    EXPECT_GE(ev.block.front(), 1);
    EXPECT_LE(ev.block.back(), 30);
  }
}

TEST(Stream, BetaPairCountMatchesRate) {
  const LambdaSpec spec{0.0, NuSpec::beta(1.5)};
  Moments m;
  for (int r = 0; r < 10000; ++r) {
    Rng g = make_rng(17, r);
    m.add(static_cast<double>(sample_event_stream(spec, 2, 10.0, g).events.size()));
  }
  const double expected = 10.0 * boost::math::constants::pi<double>() / 2.0;
  EXPECT_NEAR(m.mean(), expected, 3.0 * m.se());
}

TEST(Restrict, KOneIsIdentityAndPairIsDropped) {
  Rng g = make_rng(9, 0);
  const auto s = sample_event_stream({1.0, NuSpec::beta(1.3)}, 12, 1.0, g);
  EXPECT_EQ(restrict_stream(s, 1).events.size(), s.events.size());
  EventStream one{1.0, 5, {{0.5, {1, 2}, EventKind::Kingman, 0.0}}};
  EXPECT_TRUE(restrict_stream(one, 2).events.empty());
}

TEST(Restrict, DroppedCountMatchesRateOfK) {
  const LambdaSpec spec{1.0, NuSpec::none()};
  Moments m;
  for (int r = 0; r < 400; ++r) {
    Rng g = make_rng(21, r);
    const auto s = sample_event_stream(spec, 50, 10.0, g);
    m.add(static_cast<double>(s.events.size() - restrict_stream(s, 3).events.size()));
  }
  EXPECT_NEAR(m.mean(), 30.0, 3.0 * m.se());
}

TEST(Restrict, DroppedRateForBetaSpec) {
  const LambdaSpec spec{0.0, NuSpec::beta(1.5)};
  Moments m;
  for (int r = 0; r < 400; ++r) {
    Rng g = make_rng(22, r);
    const auto s = sample_event_stream(spec, 40, 5.0, g);
    m.add(static_cast<double>(s.events.size() - restrict_stream(s, 4).events.size()));
  }
  EXPECT_NEAR(m.mean(), 5.0 * pushing_rate(spec, 4), 3.0 * m.se());
}

TEST(Truncate, NestedWindowMatchesDirectRateAndBlockSizes) {
  const LambdaSpec spec{0.2, NuSpec::beta(1.5)};
  Moments via, direct;
  std::map<std::size_t, double> size_via, size_direct;
  for (int r = 0; r < 300; ++r) {
    Rng g = make_rng(23, r);
    const auto big = truncate_stream(sample_event_stream(spec, 60, 4.0, g), 15);
    via.add(static_cast<double>(big.events.size()));
    for (const auto& ev : big.events) size_via[std::min<std::size_t>(ev.block.size(), 5)] += 1;
    Rng h = make_rng(24, r);
    const auto small = sample_event_stream(spec, 15, 4.0, h);
    direct.add(static_cast<double>(small.events.size()));
    for (const auto& ev : small.events) size_direct[std::min<std::size_t>(ev.block.size(), 5)] += 1;
  }
  EXPECT_NEAR(via.mean(), 4.0 * pushing_rate(spec, 15), 3.0 * via.se());
  EXPECT_NEAR(direct.mean(), 4.0 * pushing_rate(spec, 15), 3.0 * direct.se());
  for (std::size_t k = 2; k <= 5; ++k) {
    const double a = size_via[k] / (via.sum), b = size_direct[k] / (direct.sum);
    EXPECT_NEAR(a, b, 0.02) << "block size " << k;
  }
}

TEST(ConditionedBlock, MatchesBruteForceConditioning) {
  // Compare the law of (j1, j2, size) with rejection from free Bernoulli vectors.
  const double x = 0.15;
  const long N = 8;
  Rng g = make_rng(31, 0);
  std::map<std::vector<long>, double> direct, brute;
  std::vector<long> block;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    sample_conditioned_block(x, N, g, block);
    direct[{block[0], block[1], static_cast<long>(block.size())}] += 1.0 / n;
  }
  int accepted = 0;
  while (accepted < n) {
    block.clear();
    for (long k = 1; k <= N; ++k)
      if (bernoulli(g, x)) block.push_back(k);
    if (block.size() < 2) continue;
    ++accepted;
    brute[{block[0], block[1], static_cast<long>(block.size())}] += 1.0 / n;
  }
  for (const auto& [key, p] : brute) {
    const double se = std::sqrt(2.0 * p * (1 - p) / n);
    EXPECT_NEAR(direct[key], p, 4.0 * se + 1e-9);
  }
}

TEST(ConditionedBlock, FullFrequencyTakesEveryLevel) {
  Rng g = make_rng(1, 1);
  std::vector<long> block;
  sample_conditioned_block(1.0, 6, g, block);
  EXPECT_EQ(block, (std::vector<long>{1, 2, 3, 4, 5, 6}));
}
