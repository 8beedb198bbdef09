#pragma once

// Simulated trust-delegated network: node roster with ground-truth roles,
// committee voting rounds and chain growth.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "trustsim/random.hpp"
#include "trustsim/trust.hpp"

namespace trustsim {

enum class AttackFamily
{
  None,
  NMA,
  CRA,
  AAA,
  BFI,
  TDP
};

inline std::string_view to_string(AttackFamily f) noexcept
{
  switch (f)
  {
  case AttackFamily::None:
    return "none";
  case AttackFamily::NMA:
    return "nma";
  case AttackFamily::CRA:
    return "cra";
  case AttackFamily::AAA:
    return "aaa";
  case AttackFamily::BFI:
    return "bfi";
  case AttackFamily::TDP:
    return "tdp";
  }
  return "none";
}

struct NodeRole
{
  enum class Kind
  {
    Honest,
    Malicious
  };

  Kind         kind{Kind::Honest};
  AttackFamily family{AttackFamily::None};  // meaningful for malicious nodes only

  bool malicious() const noexcept { return kind == Kind::Malicious; }
};

struct NetworkState
{
  std::vector<TrustProfile> profiles;
  std::vector<NodeRole>     roles;
  double                    delegation_ratio{0.5};
  std::uint64_t             pending_tx{0};
  std::uint64_t             chain_length{0};
  std::uint64_t             verified_tx_total{0};
  std::uint64_t             step_index{0};
  std::uint64_t             episode_index{1};  // 1-based episode number

  std::size_t size() const noexcept { return profiles.size(); }

  std::vector<double> trusts() const
  {
    std::vector<double> t;
    t.reserve(profiles.size());
    for (auto const &p : profiles)
    {
      t.push_back(trust_score(p));
    }
    return t;
  }

  std::size_t malicious_count() const noexcept
  {
    std::size_t n = 0;
    for (auto const &r : roles)
    {
      n += r.malicious() ? 1 : 0;
    }
    return n;
  }
};

struct ConsensusConfig
{
  std::uint64_t batch_size{10};
  double        init_alpha{8.0};
  double        init_beta{8.0};
  double        init_noise_sd{0.12};
  double        init_alpha_floor{0.5};
  double        initial_ratio{0.5};
};

enum class Vote
{
  Valid,
  Invalid,
  Conflicting
};

/// How malicious delegates vote in a round. Filled by the active attack.
struct VoteBehavior
{
  std::vector<std::size_t> conflicting;          // delegates equivocating this round
  Vote                     malicious_stance{Vote::Invalid};
  double                   detection_probability{0.5};
};

struct EvidenceEvent
{
  std::size_t node;
  Evidence    kind;
};

struct RoundOutcome
{
  bool                        block_created{false};
  std::uint64_t               verified_tx{0};
  std::map<std::size_t, Vote> delegate_votes;
  std::vector<EvidenceEvent>  evidence;  // in application order
};

/// Valid votes needed for a block from a committee of `committee` members: ceil(2/3 * committee).
constexpr std::size_t quorum(std::size_t committee) noexcept
{
  return (2 * committee + 2) / 3;
}

inline std::size_t round_half_up(double x) noexcept
{
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

/// Fresh trust profiles for every node: Beta(8, 8) with Gaussian noise on alpha.
inline void reset_trust(NetworkState &state, ConsensusConfig const &cfg, Rng &rng)
{
  for (auto &p : state.profiles)
  {
    p.alpha = std::max(cfg.init_alpha_floor, cfg.init_alpha + rng.normal(0.0, cfg.init_noise_sd));
    p.beta  = cfg.init_beta;
  }
  state.delegation_ratio  = cfg.initial_ratio;
  state.pending_tx        = 0;
  state.chain_length      = 0;
  state.verified_tx_total = 0;
  state.step_index        = 0;
}

inline NetworkState init_network(std::size_t n, double malicious_ratio, Rng &rng, ConsensusConfig const &cfg = {},
                                 AttackFamily family = AttackFamily::None)
{
  if (n < 2)
  {
    throw std::invalid_argument("init_network: need at least 2 nodes");
  }
  if (!(malicious_ratio >= 0.0 && malicious_ratio <= 1.0))
  {
    throw std::invalid_argument("init_network: malicious_ratio outside [0, 1]");
  }

  NetworkState state;
  state.profiles.resize(n);
  state.roles.resize(n);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    order[i] = i;
  }
  for (std::size_t i = n - 1; i > 0; --i)
  {
    std::swap(order[i], order[rng.index(i + 1)]);
  }
  std::size_t const bad = std::min(n, round_half_up(malicious_ratio * static_cast<double>(n)));
  for (std::size_t j = 0; j < bad; ++j)
  {
    state.roles[order[j]] = NodeRole{NodeRole::Kind::Malicious, family};
  }

  reset_trust(state, cfg, rng);
  return state;
}

/// One committee round. Honest delegates vote Valid; malicious delegates follow
/// `behavior`. Evidence is applied to `state` in place.
inline RoundOutcome run_consensus_round(NetworkState &state, std::span<std::size_t const> delegates,
                                        VoteBehavior const &behavior, TrustUpdateConfig const &trust_cfg,
                                        ConsensusConfig const &cfg, Rng &rng)
{
  if (delegates.empty())
  {
    throw std::invalid_argument("run_consensus_round: empty committee");
  }

  RoundOutcome out;
  std::size_t  valid = 0;
  for (auto const d : delegates)
  {
    if (d >= state.size())
    {
      throw std::out_of_range("run_consensus_round: delegate index out of range");
    }
    Vote v = Vote::Valid;
    if (state.roles[d].malicious())
    {
      v = behavior.malicious_stance;
      for (auto const c : behavior.conflicting)
      {
        if (c == d)
        {
          v = Vote::Conflicting;
          break;
        }
      }
    }
    valid += (v == Vote::Valid) ? 1 : 0;
    out.delegate_votes.emplace(d, v);
  }

  out.block_created = valid >= quorum(delegates.size());
  out.verified_tx   = out.block_created ? cfg.batch_size : 0;

  state.pending_tx += cfg.batch_size;
  if (out.block_created)
  {
    state.pending_tx -= std::min(state.pending_tx, cfg.batch_size);
    state.chain_length += 1;
    state.verified_tx_total += out.verified_tx;
  }

  auto apply = [&](std::size_t node, Evidence kind) {
    state.profiles[node] = apply_evidence(state.profiles[node], kind, trust_cfg);
    out.evidence.push_back({node, kind});
  };

  for (auto const &[node, vote] : out.delegate_votes)
  {
    switch (vote)
    {
    case Vote::Valid:
      if (out.block_created)
      {
        apply(node, Evidence::Valid);
      }
      break;
    case Vote::Invalid:
      apply(node, Evidence::Invalid);
      break;
    case Vote::Conflicting:
      apply(node, Evidence::Invalid);
      if (rng.bernoulli(behavior.detection_probability))
      {
        apply(node, Evidence::Malicious);
      }
      break;
    }
  }
  return out;
}

/// Mean honest trust minus mean malicious trust.
inline double trust_separation(NetworkState const &state)
{
  double      honest_sum = 0.0, bad_sum = 0.0;
  std::size_t honest_n = 0, bad_n = 0;
  for (std::size_t i = 0; i < state.size(); ++i)
  {
    double const t = trust_score(state.profiles[i]);
    if (state.roles[i].malicious())
    {
      bad_sum += t;
      ++bad_n;
    }
    else
    {
      honest_sum += t;
      ++honest_n;
    }
  }
  if (honest_n == 0 || bad_n == 0)
  {
    throw std::domain_error("trust_separation: needs at least one honest and one malicious node");
  }
  return honest_sum / static_cast<double>(honest_n) - bad_sum / static_cast<double>(bad_n);
}

}  // namespace trustsim
