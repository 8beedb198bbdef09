#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "trustsim/random.hpp"
#include "trustsim/trust.hpp"

using namespace trustsim;

TEST(TrustScore, Examples)
{
  EXPECT_DOUBLE_EQ(trust_score({8, 8}), 0.5);
  EXPECT_DOUBLE_EQ(trust_score({12, 4}), 0.75);
  EXPECT_NEAR(trust_score({7.2, 10}), 0.4186046511627907, 1e-12);
}

TEST(ApplyEvidence, Examples)
{
  TrustUpdateConfig const cfg;
  EXPECT_EQ(apply_evidence({8, 8}, Evidence::Valid, cfg), (TrustProfile{9, 8}));
  auto const m = apply_evidence({8, 8}, Evidence::Malicious, cfg);
  EXPECT_NEAR(m.alpha, 7.2, 1e-12);
  EXPECT_DOUBLE_EQ(m.beta, 10.0);
  EXPECT_EQ(apply_evidence({8, 8}, Evidence::Invalid, cfg), (TrustProfile{8, 9}));
}

TEST(TrustUpdateConfig, RejectsBadValues)
{
  EXPECT_THROW((TrustUpdateConfig{1, 1, 2, 1.0}.validate()), std::invalid_argument);
  EXPECT_THROW((TrustUpdateConfig{0, 1, 2, 0.9}.validate()), std::invalid_argument);
  EXPECT_NO_THROW(TrustUpdateConfig{}.validate());
}

// Random evidence sequences from random starting profiles.
TEST(TrustProperties, MonotoneSevereAndValidOverRandomSequences)
{
  TrustUpdateConfig const cfg;
  Rng                     rng{2024};
  int                     violations = 0;
  for (int seq = 0; seq < 10000; ++seq)
  {
    TrustProfile p{rng.uniform(0.5, 50.0), rng.uniform(0.5, 50.0)};
    int const    len = 1 + static_cast<int>(rng.index(40));
    for (int i = 0; i < len; ++i)
    {
      double const before = trust_score(p);
      auto const   kind   = static_cast<Evidence>(rng.index(3));
      auto const   next   = apply_evidence(p, kind, cfg);
      double const after  = trust_score(next);
      if (kind == Evidence::Valid && after < before)
      {
        ++violations;
      }
      if (kind != Evidence::Valid && after > before)
      {
        ++violations;
      }
      if (!next.valid() || !(after > 0.0 && after < 1.0))
      {
        ++violations;
      }
      TrustUpdateConfig equal = cfg;
      equal.delta_malicious   = equal.delta_invalid;
      if (trust_score(apply_evidence(p, Evidence::Malicious, equal)) > trust_score(apply_evidence(p, Evidence::Invalid, equal)))
      {
        ++violations;
      }
      p = next;
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(DelegationPolicy, CommitteeSize)
{
  EXPECT_EQ((DelegationPolicy{1.0, 16}.committee_size()), 16u);
  EXPECT_EQ((DelegationPolicy{0.3, 16}.committee_size()), 5u);
  EXPECT_EQ((DelegationPolicy{0.5, 16}.committee_size()), 8u);
  EXPECT_EQ((DelegationPolicy{0.1, 16}.committee_size()), 2u);
  EXPECT_EQ((DelegationPolicy{0.1, 4}.committee_size()), 1u);
  EXPECT_THROW((DelegationPolicy{0.05, 16}), std::invalid_argument);
  EXPECT_THROW((DelegationPolicy{1.2, 16}), std::invalid_argument);
  EXPECT_THROW((DelegationPolicy{0.5, 0}), std::invalid_argument);
}

TEST(SelectDelegates, FullRatioSelectsEveryone)
{
  std::vector<TrustProfile> profiles(16);
  Rng                       rng{1};
  auto const                d = select_delegates(profiles, DelegationPolicy{1.0, 16}, rng);
  ASSERT_EQ(d.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i)
  {
    EXPECT_EQ(d[i], i);
  }
}

TEST(SelectDelegates, CommitteeOfFiveDistinct)
{
  std::vector<TrustProfile> profiles(16);
  Rng                       rng{7};
  auto const                d = select_delegates(profiles, DelegationPolicy{0.3, 16}, rng);
  EXPECT_EQ(d.size(), 5u);
  EXPECT_EQ(std::set<std::size_t>(d.begin(), d.end()).size(), 5u);
}

TEST(SelectDelegates, DominantProfileWinsAlmostAlways)
{
  std::vector<TrustProfile> profiles(16, TrustProfile{1, 1000});
  profiles[6] = {1000, 1};
  Rng rng{42};
  int wins    = 0;
  for (int t = 0; t < 10000; ++t)
  {
    auto const d = select_delegates(profiles, DelegationPolicy{0.1, 4}, rng);
    wins += (d.size() == 1 && d[0] == 6) ? 1 : 0;
  }
  EXPECT_GT(wins / 10000.0, 0.999);
}

TEST(SelectDelegates, HighBeatsLowInHeadToHead)
{
  std::vector<TrustProfile> profiles{{50, 1}, {1, 50}};
  Rng                       rng{42};
  int                       wins = 0;
  for (int t = 0; t < 1000; ++t)
  {
    wins += select_delegates(profiles, DelegationPolicy{0.1, 2}, rng).front() == 0 ? 1 : 0;
  }
  EXPECT_GT(wins / 1000.0, 0.99);
}

TEST(SelectDelegates, DeterministicForEqualSeeds)
{
  std::vector<TrustProfile> profiles;
  for (int i = 0; i < 16; ++i)
  {
    profiles.push_back({1.0 + i, 17.0 - i});
  }
  Rng a{99}, b{99};
  for (int t = 0; t < 50; ++t)
  {
    EXPECT_EQ(select_delegates(profiles, DelegationPolicy{0.4, 16}, a),
              select_delegates(profiles, DelegationPolicy{0.4, 16}, b));
  }
}

TEST(SelectDelegates, RestrictedToCandidatesAndTruncated)
{
  std::vector<TrustProfile>      profiles(16);
  std::vector<std::size_t> const candidates{2, 5, 11};
  Rng                            rng{3};
  auto const d = select_delegates(profiles, DelegationPolicy{0.5, 16}, candidates, {}, rng);
  EXPECT_EQ(d, candidates);
}

TEST(SelectDelegates, ExtraIdentitiesRaiseSelectionOdds)
{
  std::vector<TrustProfile>      profiles(2, TrustProfile{8, 8});
  std::vector<std::size_t> const all{0, 1};
  std::vector<unsigned> const    ids{4, 1};
  Rng                            rng{5};
  int                            first = 0;
  for (int t = 0; t < 4000; ++t)
  {
    first += select_delegates(profiles, DelegationPolicy{0.5, 2}, all, ids, rng).front() == 0 ? 1 : 0;
  }
  // max of four draws beats one draw with probability 4/5
  EXPECT_NEAR(first / 4000.0, 0.8, 0.03);
}

TEST(Rng, BetaFallsBackToMeanOnUnderflow)
{
  Rng rng{1};
  for (int i = 0; i < 100; ++i)
  {
    double const x = rng.beta(1e-300, 1e-300);
    EXPECT_TRUE(x >= 0.0 && x <= 1.0);
  }
}

TEST(Rng, ForkIsDeterministicAndIndependentOfParentUse)
{
  Rng a{10};
  Rng b{10};
  b.uniform();
  EXPECT_EQ(a.fork(3).next_u64(), b.fork(3).next_u64());
  EXPECT_NE(a.fork(3).next_u64(), a.fork(4).next_u64());
}
