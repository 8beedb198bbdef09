#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "trustsim/attacks.hpp"

using namespace trustsim;

namespace {

using Kind = Perturbation::Kind;

// Nodes [0, bad) are malicious, the rest honest; every profile starts at Beta(8, 8).
NetworkState roster(std::size_t n, std::size_t bad, AttackFamily family)
{
  NetworkState s;
  s.profiles.assign(n, TrustProfile{8, 8});
  for (std::size_t i = 0; i < n; ++i)
  {
    s.roles.push_back(i < bad ? NodeRole{NodeRole::Kind::Malicious, family} : NodeRole{});
  }
  return s;
}

AttackConfig config(AttackFamily f)
{
  AttackConfig c;
  c.family = f;
  return c;
}

std::vector<Perturbation> of_kind(std::vector<Perturbation> const &ps, Kind k)
{
  std::vector<Perturbation> out;
  std::copy_if(ps.begin(), ps.end(), std::back_inserter(out), [&](auto const &p) { return p.kind == k; });
  return out;
}

}  // namespace

TEST(Nma, ZeroProbabilityEmitsNothing)
{
  auto cfg         = config(AttackFamily::NMA);
  cfg.nma_p_attack = 0.0;
  auto const  net  = roster(16, 5, AttackFamily::NMA);
  Rng         rng{1};
  StepContext ctx{net, {}, {}};
  for (int i = 0; i < 100; ++i)
  {
    EXPECT_TRUE(nma_step(cfg, AttackState::initial(cfg), ctx, rng).empty());
  }
}

TEST(Nma, MeanCountAndHonestTargets)
{
  auto const  cfg = config(AttackFamily::NMA);
  auto const  net = roster(16, 5, AttackFamily::NMA);
  auto const  st  = AttackState::initial(cfg);
  Rng         rng{2};
  StepContext ctx{net, {}, {}};
  std::size_t total = 0;
  for (int i = 0; i < 10000; ++i)
  {
    auto const ps = nma_step(cfg, st, ctx, rng);
    total += ps.size();
    for (auto const &p : ps)
    {
      ASSERT_FALSE(net.roles[p.target].malicious());
      ASSERT_EQ(p.kind, Kind::PenalizeBeta);
      ASSERT_DOUBLE_EQ(p.magnitude, 0.5);
    }
  }
  double const mean = static_cast<double>(total) / 10000.0;
  EXPECT_GE(mean, 2.4);
  EXPECT_LE(mean, 2.6);
}

TEST(Nma, GatedMembersStaySilent)
{
  auto const        cfg = config(AttackFamily::NMA);
  auto const        net = roster(16, 5, AttackFamily::NMA);
  bool              active[16];
  for (std::size_t i = 0; i < 16; ++i)
  {
    active[i] = i >= 5;
  }
  Rng         rng{3};
  StepContext ctx{net, std::span<bool const>{active, 16}, {}};
  for (int i = 0; i < 200; ++i)
  {
    EXPECT_TRUE(nma_step(cfg, AttackState::initial(cfg), ctx, rng).empty());
  }
}

TEST(Cra, OffCycleStepIsQuiet)
{
  auto const cfg = config(AttackFamily::CRA);
  auto       net = roster(16, 5, AttackFamily::CRA);
  net.step_index = 3;
  Rng rng{4};
  EXPECT_TRUE(cra_step(cfg, AttackState::initial(cfg), StepContext{net, {}, {}}, rng).empty());
}

TEST(Cra, OnCycleMagnitudes)
{
  auto const cfg = config(AttackFamily::CRA);
  auto       net = roster(16, 5, AttackFamily::CRA);
  // Distinct honest trust so the top quarter is unambiguous.
  for (std::size_t i = 5; i < 16; ++i)
  {
    net.profiles[i].alpha = 8.0 + static_cast<double>(i);
  }
  net.step_index = 4;
  Rng        rng{5};
  auto const ps = cra_step(cfg, AttackState::initial(cfg), StepContext{net, {}, {}}, rng);

  auto const boosts = of_kind(ps, Kind::BoostAlpha);
  ASSERT_EQ(boosts.size(), 5u);
  for (auto const &p : boosts)
  {
    EXPECT_LT(p.target, 5u);
    EXPECT_NEAR(p.magnitude, 3.4, 1e-12);
  }
  auto const hits = of_kind(ps, Kind::PenalizeBeta);
  ASSERT_EQ(hits.size(), 3u);  // ceil(0.25 * 11)
  std::set<std::size_t> targets;
  for (auto const &p : hits)
  {
    EXPECT_NEAR(p.magnitude, 4.25, 1e-12);
    targets.insert(p.target);
  }
  EXPECT_EQ(targets, (std::set<std::size_t>{13, 14, 15}));
}

TEST(Aaa, EpsilonDecaysGeometrically)
{
  auto const  cfg = config(AttackFamily::AAA);
  auto        st  = AttackState::initial(cfg);
  auto const  net = roster(16, 5, AttackFamily::AAA);
  Rng         rng{6};
  double      prev = st.aaa_eps;
  for (int i = 0; i < 10; ++i)
  {
    auto r = aaa_step(cfg, std::move(st), StepContext{net, {}, {}}, rng);
    st     = std::move(r.state);
    EXPECT_LE(st.aaa_eps, prev);
    prev = st.aaa_eps;
  }
  EXPECT_NEAR(st.aaa_eps, 0.8171, 1e-4);
  EXPECT_NEAR(st.aaa_eps, std::pow(0.98, 10), 1e-12);
}

TEST(Aaa, GreedyChoiceIsArgmax)
{
  Rng                       rng{7};
  std::vector<double> const scores{0.1, -0.2, 0.7, 0.7, 0.3};
  for (int i = 0; i < 50; ++i)
  {
    EXPECT_EQ(aaa_choose(scores, 0.0, rng), 2u);
  }
}

TEST(Aaa, ExploresUniformlyAtFullEpsilon)
{
  Rng                       rng{8};
  std::vector<double> const scores{0, 0, 1, 0, 0};
  std::vector<int>          hits(5, 0);
  for (int i = 0; i < 10000; ++i)
  {
    ++hits[aaa_choose(scores, 1.0, rng)];
  }
  for (int h : hits)
  {
    EXPECT_NEAR(h / 10000.0, 0.2, 0.02);
  }
}

TEST(Aaa, SlowPoisoningStaysSmall)
{
  auto const cfg = config(AttackFamily::AAA);
  auto       st  = AttackState::initial(cfg);
  st.aaa_eps     = 0.0;
  st.aaa_scores  = {0, 1, 0, 0, 0};
  auto const net = roster(16, 5, AttackFamily::AAA);
  Rng        rng{9};
  auto const r = aaa_step(cfg, st, StepContext{net, {}, {}}, rng);
  EXPECT_EQ(r.strategy, AaaStrategy::SlowPoisoning);
  ASSERT_EQ(r.perturbations.size(), 11u);
  for (auto const &p : r.perturbations)
  {
    EXPECT_EQ(p.kind, Kind::PenalizeBeta);
    EXPECT_FALSE(net.roles[p.target].malicious());
    EXPECT_LE(p.magnitude, 0.12 + 1e-12);
  }
}

TEST(Aaa, ScoresTrackTrustChange)
{
  auto const cfg = config(AttackFamily::AAA);
  auto       st  = AttackState::initial(cfg);
  st.aaa_eps     = 0.0;
  auto net       = roster(16, 5, AttackFamily::AAA);
  Rng  rng{10};
  auto r = aaa_step(cfg, st, StepContext{net, {}, {}}, rng);
  ASSERT_EQ(r.state.aaa_last, std::optional<std::size_t>{0});
  for (std::size_t i = 0; i < 5; ++i)
  {
    net.profiles[i] = TrustProfile{12, 8};  // mean 0.5 -> 0.6
  }
  auto r2 = aaa_step(cfg, r.state, StepContext{net, {}, {}}, rng);
  EXPECT_NEAR(r2.state.aaa_scores[0], 0.1, 1e-12);
  EXPECT_EQ(r2.state.aaa_counts[0], 1u);
}

TEST(Bfi, StrikeLandsOnWindowBoundary)
{
  auto const cfg = config(AttackFamily::BFI);
  auto       net = roster(16, 5, AttackFamily::BFI);
  net.profiles[9].alpha = 20;  // top honest node
  net.step_index        = 12;
  Rng        rng{11};
  auto const r      = bfi_step(cfg, AttackState::initial(cfg), StepContext{net, {}, {}}, rng);
  EXPECT_EQ(r.state.bfi_phase, BfiPhase::Strategic);
  auto const hits = of_kind(r.perturbations, Kind::PenalizeBeta);
  ASSERT_EQ(hits.size(), 5u);
  for (auto const &p : hits)
  {
    EXPECT_EQ(p.target, 9u);
    EXPECT_DOUBLE_EQ(p.magnitude, 4.0);
  }

  net.step_index = 13;
  auto const quiet = bfi_step(cfg, AttackState::initial(cfg), StepContext{net, {}, {}}, rng);
  EXPECT_TRUE(of_kind(quiet.perturbations, Kind::PenalizeBeta).empty());
}

TEST(Bfi, PhaseThresholds)
{
  auto const cfg = config(AttackFamily::BFI);
  EXPECT_EQ(bfi_phase(0.35, cfg), BfiPhase::Recovery);
  EXPECT_DOUBLE_EQ(bfi_equivocation_rate(bfi_phase(0.35, cfg), cfg), 0.2);
  EXPECT_EQ(bfi_phase(0.5, cfg), BfiPhase::Strategic);
  EXPECT_DOUBLE_EQ(bfi_equivocation_rate(BfiPhase::Strategic, cfg), 0.9);
  EXPECT_EQ(bfi_phase(0.61, cfg), BfiPhase::Aggressive);
  EXPECT_EQ(bfi_phase(0.6, cfg), BfiPhase::Strategic);
  EXPECT_EQ(bfi_phase(0.4, cfg), BfiPhase::Strategic);
}

TEST(Bfi, SybilAmplification)
{
  auto const cfg = config(AttackFamily::BFI);
  EXPECT_DOUBLE_EQ(sybil_amplify(1.0, cfg), 4.0);
  auto const net = roster(16, 5, AttackFamily::BFI);
  Adversary  adv{cfg};
  auto const ids = adv.identities(net, {});
  for (std::size_t i = 0; i < 16; ++i)
  {
    EXPECT_EQ(ids[i], i < 5 ? 4u : 1u);
  }
}

TEST(Bfi, EquivocationOnlyFromMaliciousDelegates)
{
  auto const cfg = config(AttackFamily::BFI);
  auto const net = roster(16, 5, AttackFamily::BFI);
  std::vector<std::size_t> const delegates{0, 1, 2, 6, 7};
  Rng                            rng{12};
  std::size_t                    flagged = 0;
  for (int i = 0; i < 2000; ++i)
  {
    auto const r = bfi_step(cfg, AttackState::initial(cfg), StepContext{net, {}, delegates}, rng);
    for (auto const &p : of_kind(r.perturbations, Kind::MarkConflicting))
    {
      ASSERT_LT(p.target, 5u);
      ++flagged;
    }
  }
  EXPECT_NEAR(flagged / 6000.0, 0.9, 0.03);
}

TEST(Bfi, EclipseForgesByzantineMean)
{
  auto const cfg = config(AttackFamily::BFI);
  auto       net = roster(16, 5, AttackFamily::BFI);
  for (std::size_t i = 0; i < 5; ++i)
  {
    net.profiles[i] = TrustProfile{9, 11};
  }
  net.step_index = 1;
  Rng        rng{13};
  auto const r       = bfi_step(cfg, AttackState::initial(cfg), StepContext{net, {}, {}}, rng);
  auto const forgery = of_kind(r.perturbations, Kind::CorruptObservation);
  ASSERT_EQ(forgery.size(), 1u);
  EXPECT_FALSE(net.roles[forgery[0].target].malicious());
  EXPECT_NEAR(forgery[0].magnitude, 0.45, 1e-12);
  EXPECT_EQ(forgery[0].feature_mask, kTrustFeatureMask);
  EXPECT_EQ(r.state.bfi_eclipse_target, forgery[0].target);
}

TEST(Tdp, DormantBeforeActivation)
{
  auto const cfg    = config(AttackFamily::TDP);
  auto       net    = roster(16, 5, AttackFamily::TDP);
  net.episode_index = 24;
  Rng        rng{14};
  auto const r = tdp_step(cfg, AttackState::initial(cfg), StepContext{net, {}, {}}, 1.0, rng);
  EXPECT_TRUE(r.perturbations.empty());
  EXPECT_FALSE(r.state.tdp_activated);
}

TEST(Tdp, ActivationHitsTopShare)
{
  auto const cfg = config(AttackFamily::TDP);
  auto       net = roster(16, 5, AttackFamily::TDP);
  for (std::size_t i = 5; i < 16; ++i)
  {
    net.profiles[i].alpha = 8.0 + static_cast<double>(i);
  }
  net.episode_index = 25;
  Rng        rng{15};
  auto const r = tdp_step(cfg, AttackState::initial(cfg), StepContext{net, {}, {}}, 1.0, rng);
  EXPECT_TRUE(r.state.tdp_activated);
  auto const hits = of_kind(r.perturbations, Kind::PenalizeBeta);
  ASSERT_EQ(hits.size(), 4u);  // ceil(0.35 * 11)
  for (auto const &p : hits)
  {
    EXPECT_NEAR(p.magnitude, 3.75, 1e-12);
    EXPECT_GE(p.target, 12u);
  }
  EXPECT_EQ(of_kind(r.perturbations, Kind::BoostAlpha).size(), 5u);
}

TEST(Tdp, ActivationIsSticky)
{
  auto const cfg = config(AttackFamily::TDP);
  auto       net = roster(16, 5, AttackFamily::TDP);
  Adversary  adv{cfg};
  Rng        rng{16};
  bool       seen = false;
  for (std::uint64_t ep : {1, 10, 24, 25, 26, 3, 40})
  {
    net.episode_index = ep;
    auto const out    = adv.step(StepContext{net, {}, {}}, rng);
    seen              = seen || ep >= 25;
    EXPECT_EQ(adv.state().tdp_activated, seen) << ep;
    EXPECT_EQ(out.votes.malicious_stance, seen ? Vote::Valid : Vote::Invalid);
  }
}

TEST(Adversary, NoneFamilyIsInert)
{
  Adversary  adv{config(AttackFamily::None)};
  auto const net = roster(16, 5, AttackFamily::None);
  Rng        a{17}, b{17};
  auto const out = adv.step(StepContext{net, {}, {}}, a);
  EXPECT_TRUE(out.perturbations.empty());
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(AttackConfig, ValidationAndParsing)
{
  AttackConfig c;
  EXPECT_NO_THROW(c.validate());
  c.nma_p_attack = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c            = {};
  c.cra_period = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(parse_attack_family("CRA"), AttackFamily::CRA);
  EXPECT_EQ(parse_attack_family("tdp"), AttackFamily::TDP);
  EXPECT_FALSE(parse_attack_family("xyz").has_value());
}
