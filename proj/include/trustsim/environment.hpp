#pragma once

// The delegation MDP: one environment owns a network, an adversary, an access
// gate and its random streams. Each step runs
//
//   observe -> act -> apply_action -> access gating -> delegate selection
//   -> attack step -> committee vote -> feedback -> reward -> agent update
//
// Attack feedback (trust boosts and penalties) is committed only with a block.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "trustsim/abac.hpp"
#include "trustsim/agents/agent.hpp"
#include "trustsim/attacks.hpp"
#include "trustsim/consensus.hpp"
#include "trustsim/metrics.hpp"
#include "trustsim/random.hpp"
#include "trustsim/state.hpp"
#include "trustsim/trust.hpp"

namespace trustsim {

struct RewardConfig
{
  double w_f1{0.7};
  double w_step{0.3};
  double w_fn{3.0};
  double collusion_trigger{2.0};
  double collusion_cap{20.0};
  double collusion_scale{2.0};
  double kappa_max{10.0};
  double tx_weight{10.0};
  double block_bonus{50.0};

  void validate() const
  {
    if (w_f1 < 0.0 || w_step < 0.0 || w_fn < 0.0 || collusion_cap < 0.0 || collusion_scale < 0.0)
    {
      throw std::invalid_argument("reward weights must be nonnegative");
    }
    if (!(kappa_max > 0.0))
    {
      throw std::invalid_argument("kappa_max must be positive");
    }
  }
};

/// Operational reward for one round.
inline double compute_r_step(std::uint64_t verified_tx, bool block_created, std::uint64_t batch_size,
                             RewardConfig const &cfg = {})
{
  double const frac = batch_size == 0 ? 0.0 : static_cast<double>(verified_tx) / static_cast<double>(batch_size);
  return cfg.tx_weight * frac + (block_created ? cfg.block_bonus : 0.0);
}

inline double compute_reward(ConfusionMatrix const &cm, double r_step, double kappa, RewardConfig const &cfg = {})
{
  double const penalty =
      kappa > cfg.collusion_trigger ? std::min(kappa * cfg.collusion_scale, cfg.collusion_cap) : 0.0;
  return cfg.w_f1 * f1(cm) * 100.0 + cfg.w_step * r_step / 100.0 - cfg.w_fn * static_cast<double>(cm.fn) - penalty;
}

struct EnvironmentConfig
{
  std::size_t       node_count{16};
  double            malicious_ratio{0.3};
  double            theta{0.45};
  std::uint64_t     steps{100};
  std::uint64_t     seed{42};
  ConsensusConfig   consensus{};
  TrustUpdateConfig trust{};
  RewardConfig      reward{};
  AttackConfig      attack{};
  std::string       policy{"(trust >= 45) & ((role == VALIDATOR) | (role == DELEGATE))"};
  std::int64_t      clearance{3};
  std::int64_t      permissions{255};
  bool              log_evidence{false};

  void validate() const
  {
    if (node_count < 2)
    {
      throw std::invalid_argument("node_count must be >= 2");
    }
    if (!(malicious_ratio >= 0.0 && malicious_ratio <= 1.0))
    {
      throw std::invalid_argument("malicious_ratio must lie in [0, 1]");
    }
    if (!(theta > 0.0 && theta < 1.0))
    {
      throw std::invalid_argument("theta must lie in (0, 1)");
    }
    if (steps < 1)
    {
      throw std::invalid_argument("steps must be >= 1");
    }
    if (consensus.batch_size < 1)
    {
      throw std::invalid_argument("batch_size must be >= 1");
    }
    if (!(consensus.initial_ratio >= DelegationPolicy::kMinRatio && consensus.initial_ratio <= DelegationPolicy::kMaxRatio))
    {
      throw std::invalid_argument("initial delegation ratio outside [0.1, 1.0]");
    }
    trust.validate();
    reward.validate();
    attack.validate();
  }
};

/// One trust change, either from a committee vote or from committed attack feedback.
struct EvidenceLogEntry
{
  enum class Source : std::uint8_t
  {
    Vote,
    Feedback
  };

  std::uint64_t episode{0};
  std::uint64_t step{0};
  std::size_t   node{0};
  Source        source{Source::Vote};
  int           kind{0};  // Evidence for votes, Perturbation::Kind for feedback
  double        magnitude{0.0};

  friend bool operator==(EvidenceLogEntry const &, EvidenceLogEntry const &) = default;
};

struct StepResult
{
  double                   reward{0.0};
  double                   kappa{0.0};
  double                   r_step{0.0};
  ConfusionMatrix          confusion{};
  RoundOutcome             round{};
  std::vector<std::size_t> delegates;
  std::size_t              eligible{0};
};

class Environment
{
public:
  explicit Environment(EnvironmentConfig cfg)
    : cfg_{std::move(cfg)}
    , adversary_{(cfg_.validate(), cfg_.attack), cfg_.trust.delta_valid}
    , gate_{abac::parse_policy(cfg_.policy), std::make_unique<abac::SimulatedBackend>(splitmix64(cfg_.seed ^ 0xabacULL))}
    , history_{10}
  {
    Rng root{cfg_.seed};
    net_rng_    = root.fork(1);
    select_rng_ = root.fork(2);
    attack_rng_ = root.fork(3);
    vote_rng_   = root.fork(4);
    gate_.policy().check(abac::AttributeSchema::standard());
    net_ = init_network(cfg_.node_count, cfg_.malicious_ratio, net_rng_, cfg_.consensus, cfg_.attack.family);
  }

  EnvironmentConfig const &config() const noexcept { return cfg_; }
  NetworkState const      &network() const noexcept { return net_; }
  Adversary const         &adversary() const noexcept { return adversary_; }

  std::vector<EvidenceLogEntry> const &evidence_log() const noexcept { return log_; }

  ObservationConfig observation_config() const noexcept
  {
    return {cfg_.steps, cfg_.consensus.batch_size, cfg_.reward.kappa_max, 0.3, 0.7, cfg_.theta};
  }

  /// Fresh trust for a new episode. Roles and adversary memory persist across episodes.
  void reset_episode(std::uint64_t episode)
  {
    reset_trust(net_, cfg_.consensus, net_rng_);
    net_.episode_index = episode;
    history_.clear();
    forgeries_.clear();
    last_committee_.clear();
  }

  StateVector observe() const { return extract_state(net_, history_, observation_config(), forgeries_); }

  StepResult step(Action action)
  {
    StepResult out;
    net_.delegation_ratio = apply_action(net_.delegation_ratio, action);

    std::size_t const n      = net_.size();
    auto const        active = gate();
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < n; ++i)
    {
      if (active[i])
      {
        candidates.push_back(i);
      }
    }
    out.eligible = candidates.size();
    std::span<bool const> const active_span{active.get(), n};

    auto const ids = adversary_.identities(net_, active_span);
    if (!candidates.empty())
    {
      out.delegates = select_delegates(net_.profiles, DelegationPolicy{net_.delegation_ratio, net_.size()}, candidates,
                                       ids, select_rng_);
    }

    auto const attack = adversary_.step(StepContext{net_, active_span, out.delegates}, attack_rng_);

    if (!out.delegates.empty())
    {
      out.round = run_consensus_round(net_, out.delegates, attack.votes, cfg_.trust, cfg_.consensus, vote_rng_);
      for (auto const &e : out.round.evidence)
      {
        log(e.node, EvidenceLogEntry::Source::Vote, static_cast<int>(e.kind), 0.0);
      }
    }
    else
    {
      net_.pending_tx += cfg_.consensus.batch_size;
    }

    forgeries_.clear();
    for (auto const &p : attack.perturbations)
    {
      switch (p.kind)
      {
      case Perturbation::Kind::BoostAlpha:
        if (out.round.block_created)
        {
          net_.profiles[p.target].alpha += p.magnitude;
          log(p.target, EvidenceLogEntry::Source::Feedback, static_cast<int>(p.kind), p.magnitude);
        }
        break;
      case Perturbation::Kind::PenalizeBeta:
        if (out.round.block_created)
        {
          net_.profiles[p.target].beta += p.magnitude;
          log(p.target, EvidenceLogEntry::Source::Feedback, static_cast<int>(p.kind), p.magnitude);
        }
        break;
      case Perturbation::Kind::CorruptObservation:
        forgeries_.push_back({p.target, p.magnitude});
        break;
      case Perturbation::Kind::MarkConflicting:
        break;
      }
    }

    history_.push({out.round.block_created, out.round.verified_tx, out.delegates.size()});
    last_committee_ = out.delegates;
    net_.step_index += 1;

    auto const trusts = net_.trusts();
    out.confusion     = classify(trusts, net_.roles, cfg_.theta);
    out.kappa         = collusion_kappa(trusts, net_.roles, cfg_.reward.kappa_max);
    out.r_step = compute_r_step(out.round.verified_tx, out.round.block_created, cfg_.consensus.batch_size, cfg_.reward);
    out.reward = compute_reward(out.confusion, out.r_step, out.kappa, cfg_.reward);
    if (!std::isfinite(out.reward))
    {
      throw std::runtime_error("non-finite reward at episode " + std::to_string(net_.episode_index) + " step " +
                               std::to_string(net_.step_index));
    }
    return out;
  }

private:
  /// Access decision per node, evaluated on encrypted attributes.
  std::unique_ptr<bool[]> gate()
  {
    auto active = std::make_unique<bool[]>(net_.size());
    for (std::size_t i = 0; i < net_.size(); ++i)
    {
      bool const was_delegate =
          std::find(last_committee_.begin(), last_committee_.end(), i) != last_committee_.end();
      abac::AttributeSet attrs;
      attrs.set("trust", abac::quantize_trust(trust_score(net_.profiles[i])))
          .set("role", was_delegate ? abac::role_code::kDelegate : abac::role_code::kValidator)
          .set("clearance", cfg_.clearance)
          .set("permissions", cfg_.permissions);
      active[i] = gate_.decide(attrs);
    }
    return active;
  }

  void log(std::size_t node, EvidenceLogEntry::Source source, int kind, double magnitude)
  {
    if (cfg_.log_evidence)
    {
      log_.push_back({net_.episode_index, net_.step_index, node, source, kind, magnitude});
    }
  }

  EnvironmentConfig               cfg_;
  Adversary                       adversary_;
  abac::AccessGate                gate_;
  Rng                             net_rng_;
  Rng                             select_rng_;
  Rng                             attack_rng_;
  Rng                             vote_rng_;
  NetworkState                    net_;
  RoundHistory                    history_;
  std::vector<ObservationForgery> forgeries_;
  std::vector<std::size_t>        last_committee_;
  std::vector<EvidenceLogEntry>   log_;
};

/// Runs one episode of `env.config().steps` steps and returns its record.
inline EpisodeRecord run_episode(Environment &env, Agent &agent, std::uint64_t episode)
{
  env.reset_episode(episode);
  agent.begin_episode(episode);

  EpisodeRecord rec;
  rec.episode        = episode;
  double kappa_sum   = 0.0;
  auto const steps   = env.config().steps;
  StateVector s      = env.observe();
  for (std::uint64_t t = 0; t < steps; ++t)
  {
    Action const a   = agent.act(s);
    auto const   res = env.step(a);
    StateVector  s2  = env.observe();
    agent.observe(Transition{s, a, res.reward, s2, t + 1 == steps});
    rec.cumulative_reward += res.reward;
    kappa_sum += res.kappa;
    s = s2;
  }
  agent.end_episode();

  auto const &net      = env.network();
  auto const  trusts   = net.trusts();
  rec.confusion        = classify(trusts, net.roles, env.config().theta);
  rec.f1               = f1(rec.confusion);
  rec.precision        = precision(rec.confusion);
  rec.recall           = recall(rec.confusion);
  rec.throughput       = net.verified_tx_total;
  rec.chain_length     = net.chain_length;
  rec.mean_kappa       = kappa_sum / static_cast<double>(steps);
  bool const mixed     = net.malicious_count() > 0 && net.malicious_count() < net.size();
  rec.trust_separation = mixed ? trust_separation(net) : 0.0;
  rec.delegation_ratio = net.delegation_ratio;
  return rec;
}

}  // namespace trustsim
