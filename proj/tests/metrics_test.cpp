#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "trustsim/metrics.hpp"
#include "trustsim/random.hpp"

using namespace trustsim;

namespace {

std::vector<NodeRole> roles(std::size_t bad, std::size_t good)
{
  std::vector<NodeRole> r(bad, NodeRole{NodeRole::Kind::Malicious, AttackFamily::None});
  r.resize(bad + good);
  return r;
}

}  // namespace

TEST(Classify, PerfectSeparation)
{
  std::vector<double> t(5, 0.2);
  t.resize(16, 0.8);
  EXPECT_EQ(classify(t, roles(5, 11), 0.45), (ConfusionMatrix{5, 0, 0, 11}));
}

TEST(Classify, NothingBelowThreshold)
{
  std::vector<double> t(16, 0.7);
  auto const          cm = classify(t, roles(5, 11), 0.45);
  EXPECT_EQ(cm.tp, 0u);
  EXPECT_EQ(cm.fp, 0u);
}

TEST(Classify, BoundaryIsHonest)
{
  std::vector<double> t{0.45};
  EXPECT_EQ(classify(t, roles(1, 0), 0.45).fn, 1u);
}

TEST(Classify, LengthMismatchThrows)
{
  std::vector<double> t(3, 0.5);
  EXPECT_THROW(classify(t, roles(1, 1), 0.45), std::invalid_argument);
}

TEST(F1, Examples)
{
  EXPECT_DOUBLE_EQ(f1({5, 0, 0, 11}), 1.0);
  ConfusionMatrix const mixed{1, 11, 4, 0};
  EXPECT_NEAR(precision(mixed), 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(recall(mixed), 0.2, 1e-15);
  EXPECT_NEAR(f1(mixed), 2.0 / 17.0, 1e-12);
  EXPECT_DOUBLE_EQ(f1({0, 0, 5, 11}), 0.0);
}

TEST(F1, PropertiesOverRandomMatrices)
{
  Rng rng{11};
  for (int i = 0; i < 10000; ++i)
  {
    std::size_t const bad = rng.index(17);
    std::vector<double> t(16);
    for (auto &x : t)
    {
      x = rng.uniform();
    }
    auto const cm = classify(t, roles(bad, 16 - bad), 0.45);
    ASSERT_EQ(cm.total(), 16u);
    ASSERT_EQ(cm.tp + cm.fn, bad);
    ASSERT_EQ(cm.fp + cm.tn, 16 - bad);
    double const f = f1(cm), p = precision(cm), r = recall(cm);
    if (cm.tp == 0)
    {
      ASSERT_EQ(f, 0.0);
    }
    ASSERT_EQ(f == 1.0, cm.fp == 0 && cm.fn == 0 && cm.tp > 0);
    if (p > 0 && r > 0)
    {
      ASSERT_LE(f, std::sqrt(p * r) + 1e-12);
      ASSERT_LE(std::sqrt(p * r), (p + r) / 2 + 1e-12);
    }
  }
}

TEST(AggregateTail, ConstantAndAlternating)
{
  std::vector<EpisodeRecord> rs(12);
  for (auto &r : rs)
  {
    r.f1 = 1.0;
  }
  auto s = aggregate_tail(rs, 10);
  EXPECT_DOUBLE_EQ(s.f1.mean, 1.0);
  EXPECT_DOUBLE_EQ(s.f1.sd, 0.0);

  for (std::size_t i = 0; i < rs.size(); ++i)
  {
    rs[i].f1 = i % 2 == 0 ? 0.8 : 1.0;
  }
  s = aggregate_tail(rs, 10);
  EXPECT_NEAR(s.f1.mean, 0.9, 1e-12);
  EXPECT_NEAR(s.f1.sd, 0.1, 1e-12);
}

TEST(AggregateTail, Errors)
{
  std::vector<EpisodeRecord> rs(5);
  EXPECT_THROW(aggregate_tail(rs, 10), std::invalid_argument);
  EXPECT_THROW(aggregate_tail({}, 1), std::invalid_argument);
}
