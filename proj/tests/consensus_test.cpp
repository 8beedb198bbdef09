#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "trustsim/consensus.hpp"

using namespace trustsim;

namespace {

NetworkState roster(std::vector<bool> malicious)
{
  NetworkState s;
  s.profiles.assign(malicious.size(), TrustProfile{8, 8});
  for (bool m : malicious)
  {
    s.roles.push_back(m ? NodeRole{NodeRole::Kind::Malicious, AttackFamily::None} : NodeRole{});
  }
  return s;
}

std::vector<std::size_t> first(std::size_t k)
{
  std::vector<std::size_t> v(k);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

TEST(InitNetwork, FiveMaliciousOfSixteen)
{
  Rng  rng{42};
  auto s = init_network(16, 0.30, rng);
  EXPECT_EQ(s.size(), 16u);
  EXPECT_EQ(s.malicious_count(), 5u);
  EXPECT_DOUBLE_EQ(s.delegation_ratio, 0.5);
}

TEST(InitNetwork, NoMaliciousAtZeroRatio)
{
  Rng  rng{3};
  auto s = init_network(16, 0.0, rng);
  EXPECT_EQ(s.malicious_count(), 0u);
  for (double t : s.trusts())
  {
    EXPECT_NEAR(t, 0.5, 0.03);
  }
}

TEST(InitNetwork, MeanInitialTrustNearHalf)
{
  Rng    rng{1};
  double sum = 0.0;
  for (int i = 0; i < 1000; ++i)
  {
    auto const t = init_network(16, 0.3, rng).trusts();
    sum += std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
  }
  double const mean = sum / 1000.0;
  EXPECT_GE(mean, 0.48);
  EXPECT_LE(mean, 0.52);
}

TEST(InitNetwork, MaliciousIndicesVaryWithSeed)
{
  Rng  a{1}, b{2};
  auto sa = init_network(16, 0.3, a);
  auto sb = init_network(16, 0.3, b);
  bool differ = false;
  for (std::size_t i = 0; i < 16; ++i)
  {
    differ |= sa.roles[i].malicious() != sb.roles[i].malicious();
  }
  EXPECT_TRUE(differ);
}

TEST(InitNetwork, RejectsTinyNetworks)
{
  Rng rng{1};
  EXPECT_THROW(init_network(1, 0.3, rng), std::invalid_argument);
  EXPECT_THROW(init_network(16, 1.5, rng), std::invalid_argument);
}

TEST(Quorum, TwoThirdsRule)
{
  EXPECT_EQ(quorum(3), 2u);
  EXPECT_EQ(quorum(5), 4u);
  EXPECT_EQ(quorum(6), 4u);
  EXPECT_EQ(quorum(9), 6u);
  EXPECT_EQ(quorum(1), 1u);
}

TEST(ConsensusRound, AllHonestCreatesBlock)
{
  auto s = roster(std::vector<bool>(5, false));
  Rng  rng{1};
  auto out = run_consensus_round(s, first(5), {}, {}, {}, rng);
  EXPECT_TRUE(out.block_created);
  EXPECT_EQ(out.verified_tx, 10u);
  EXPECT_EQ(s.chain_length, 1u);
  for (std::size_t i = 0; i < 5; ++i)
  {
    EXPECT_DOUBLE_EQ(s.profiles[i].alpha, 9.0);
  }
}

TEST(ConsensusRound, ThreeOfFiveValidIsNoBlock)
{
  auto s   = roster({false, false, false, true, true});
  Rng  rng{1};
  auto out = run_consensus_round(s, first(5), {}, {}, {}, rng);
  EXPECT_FALSE(out.block_created);
  EXPECT_EQ(out.verified_tx, 0u);
  EXPECT_EQ(s.chain_length, 0u);
  // No block: honest voters get no Valid evidence; Invalid voters are penalised.
  EXPECT_DOUBLE_EQ(s.profiles[0].alpha, 8.0);
  EXPECT_DOUBLE_EQ(s.profiles[3].beta, 9.0);
}

TEST(ConsensusRound, FourOfSixValidIsBlock)
{
  auto s   = roster({false, false, false, false, true, true});
  Rng  rng{1};
  auto out = run_consensus_round(s, first(6), {}, {}, {}, rng);
  EXPECT_TRUE(out.block_created);
}

TEST(ConsensusRound, ConflictingVotesPenalisedAndSometimesDetected)
{
  auto         s = roster({false, true});
  VoteBehavior vb;
  vb.conflicting           = {1};
  vb.detection_probability = 1.0;
  Rng  rng{1};
  auto out = run_consensus_round(s, first(2), vb, {}, {}, rng);
  EXPECT_EQ(out.delegate_votes.at(1), Vote::Conflicting);
  EXPECT_NEAR(s.profiles[1].alpha, 7.2, 1e-12);
  EXPECT_DOUBLE_EQ(s.profiles[1].beta, 11.0);

  vb.detection_probability = 0.0;
  auto s2 = roster({false, true});
  run_consensus_round(s2, first(2), vb, {}, {}, rng);
  EXPECT_DOUBLE_EQ(s2.profiles[1].alpha, 8.0);
  EXPECT_DOUBLE_EQ(s2.profiles[1].beta, 9.0);
}

TEST(ConsensusRound, RejectsEmptyOrOutOfRangeCommittee)
{
  auto s = roster({false, false});
  Rng  rng{1};
  EXPECT_THROW(run_consensus_round(s, {}, {}, {}, {}, rng), std::invalid_argument);
  std::vector<std::size_t> bad{7};
  EXPECT_THROW(run_consensus_round(s, bad, {}, {}, {}, rng), std::out_of_range);
}

TEST(ConsensusRound, HonestFullCommitteeGrowsChainEveryStep)
{
  Rng  rng{5};
  auto s = init_network(16, 0.0, rng);
  for (int t = 0; t < 100; ++t)
  {
    auto const rolesBefore = s.malicious_count();
    run_consensus_round(s, first(16), {}, {}, {}, rng);
    EXPECT_EQ(s.malicious_count(), rolesBefore);
  }
  EXPECT_EQ(s.chain_length, 100u);
  EXPECT_EQ(s.verified_tx_total, 1000u);
}

TEST(TrustSeparation, Examples)
{
  auto s = roster({false, false, true});
  s.profiles = {{8, 2}, {8, 2}, {3, 7}};
  EXPECT_NEAR(trust_separation(s), 0.5, 1e-12);
  s.profiles = {{5, 5}, {5, 5}, {5, 5}};
  EXPECT_DOUBLE_EQ(trust_separation(s), 0.0);
  s.profiles = {{9, 1}, {7, 3}, {2, 8}};
  EXPECT_NEAR(trust_separation(s), 0.6, 1e-12);
  EXPECT_THROW(trust_separation(roster({false, false})), std::domain_error);
}
