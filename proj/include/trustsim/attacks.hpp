#pragma once

// Adversary families as seedable state machines.
//
// Attacks never write trust scores directly. Each step they emit Perturbations
// that the environment maps into Beta evidence (BoostAlpha -> alpha += m,
// PenalizeBeta -> beta += m), flag equivocating delegates, or corrupt the
// defender's observation. Only malicious nodes that currently pass the access
// gate act; the coalition size |M| used in magnitudes counts those nodes.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trustsim/consensus.hpp"
#include "trustsim/random.hpp"

namespace trustsim {

struct AttackConfig
{
  AttackFamily family{AttackFamily::None};

  double base_evidence{1.0};
  double detection_probability{0.5};  // chance an equivocating vote is caught

  double nma_p_attack{0.5};
  double nma_noise{0.5};

  double        cra_intensity{0.85};
  std::uint64_t cra_period{2};
  double        cra_target_fraction{0.25};

  std::size_t   aaa_strategy_count{5};
  double        aaa_eps_start{1.0};
  double        aaa_eps_decay{0.98};
  double        aaa_factor{0.12};
  std::uint64_t aaa_burst_period{5};

  double        bfi_equivocation_rate{0.90};
  double        bfi_recovery_rate{0.20};
  unsigned      bfi_sybil_k{4};
  std::uint64_t bfi_window{6};
  double        bfi_aggressive_above{0.6};
  double        bfi_recovery_below{0.4};

  std::uint64_t tdp_activation_episode{25};
  double        tdp_intensity{0.75};
  double        tdp_target_ratio{0.35};

  void validate() const
  {
    auto unit = [](double v, char const *name) {
      if (!(v >= 0.0 && v <= 1.0))
      {
        throw std::invalid_argument(std::string{name} + " must lie in [0, 1]");
      }
    };
    unit(detection_probability, "detection_probability");
    unit(nma_p_attack, "nma_p_attack");
    unit(nma_noise, "nma_noise");
    unit(cra_intensity, "cra_intensity");
    unit(cra_target_fraction, "cra_target_fraction");
    unit(aaa_eps_start, "aaa_eps_start");
    unit(aaa_eps_decay, "aaa_eps_decay");
    unit(aaa_factor, "aaa_factor");
    unit(bfi_equivocation_rate, "bfi_equivocation_rate");
    unit(bfi_recovery_rate, "bfi_recovery_rate");
    unit(bfi_aggressive_above, "bfi_aggressive_above");
    unit(bfi_recovery_below, "bfi_recovery_below");
    unit(tdp_intensity, "tdp_intensity");
    unit(tdp_target_ratio, "tdp_target_ratio");
    if (cra_period < 1 || bfi_window < 1 || aaa_burst_period < 1)
    {
      throw std::invalid_argument("attack periods and windows must be >= 1");
    }
    if (aaa_strategy_count != 5)
    {
      throw std::invalid_argument("aaa_strategy_count: exactly five strategy templates exist");
    }
    if (bfi_sybil_k < 1)
    {
      throw std::invalid_argument("bfi_sybil_k must be >= 1");
    }
    if (!(base_evidence > 0.0))
    {
      throw std::invalid_argument("base_evidence must be positive");
    }
  }
};

inline std::optional<AttackFamily> parse_attack_family(std::string_view s)
{
  auto const lower = [](std::string_view v) {
    std::string out{v};
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
  };
  for (auto f : {AttackFamily::None, AttackFamily::NMA, AttackFamily::CRA, AttackFamily::AAA, AttackFamily::BFI,
                 AttackFamily::TDP})
  {
    if (to_string(f) == lower(s))
    {
      return f;
    }
  }
  return std::nullopt;
}

struct Perturbation
{
  enum class Kind
  {
    BoostAlpha,
    PenalizeBeta,
    MarkConflicting,
    CorruptObservation
  };

  std::size_t   target{0};
  Kind          kind{Kind::BoostAlpha};
  double        magnitude{0.0};     // for CorruptObservation: the trust value reported in place of the real one
  std::uint32_t feature_mask{0};    // CorruptObservation only: state features fed by the forged value
};

enum class AaaStrategy : std::size_t
{
  GradientExploitation = 0,
  SlowPoisoning,
  StrategicCooperation,
  Mimicry,
  TemporalCoordination
};

enum class BfiPhase
{
  Aggressive,
  Strategic,
  Recovery
};

struct AttackState
{
  // AAA
  std::vector<double>        aaa_scores;
  std::vector<std::uint64_t> aaa_counts;
  double                     aaa_eps{1.0};
  std::optional<std::size_t> aaa_last;
  double                     aaa_last_mean{0.0};

  // BFI
  BfiPhase                   bfi_phase{BfiPhase::Strategic};
  std::optional<std::size_t> bfi_eclipse_target;

  // TDP
  bool                     tdp_activated{false};
  std::vector<std::size_t> tdp_targets;

  static AttackState initial(AttackConfig const &cfg)
  {
    AttackState s;
    s.aaa_scores.assign(cfg.aaa_strategy_count, 0.0);
    s.aaa_counts.assign(cfg.aaa_strategy_count, 0);
    s.aaa_eps = cfg.aaa_eps_start;
    return s;
  }
};

/// What the attack sees each step. `active[i]` is the access-gate decision for node i.
struct StepContext
{
  NetworkState const          &net;
  std::span<bool const>        active;
  std::span<std::size_t const> delegates;
};

namespace attack_detail {

struct Coalition
{
  std::vector<std::size_t> malicious;  // every malicious node
  std::vector<std::size_t> active;     // malicious nodes passing the gate
  std::vector<std::size_t> honest;
};

inline Coalition split(StepContext const &ctx)
{
  Coalition c;
  for (std::size_t i = 0; i < ctx.net.size(); ++i)
  {
    if (ctx.net.roles[i].malicious())
    {
      c.malicious.push_back(i);
      if (ctx.active.empty() || ctx.active[i])
      {
        c.active.push_back(i);
      }
    }
    else
    {
      c.honest.push_back(i);
    }
  }
  return c;
}

inline bool contains(std::span<std::size_t const> xs, std::size_t x)
{
  return std::find(xs.begin(), xs.end(), x) != xs.end();
}

/// Honest nodes ordered by descending trust (ties by index), truncated to `count`.
inline std::vector<std::size_t> top_honest(NetworkState const &net, std::vector<std::size_t> honest, std::size_t count)
{
  std::stable_sort(honest.begin(), honest.end(), [&](std::size_t a, std::size_t b) {
    return trust_score(net.profiles[a]) > trust_score(net.profiles[b]);
  });
  honest.resize(std::min(count, honest.size()));
  return honest;
}

inline std::size_t ceil_fraction(double fraction, std::size_t n)
{
  // Guard against 0.35 * 20 = 7.000000000000001 style round-up.
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

inline double mean_trust(NetworkState const &net, std::span<std::size_t const> nodes)
{
  if (nodes.empty())
  {
    return 0.0;
  }
  double s = 0.0;
  for (auto const i : nodes)
  {
    s += trust_score(net.profiles[i]);
  }
  return s / static_cast<double>(nodes.size());
}

/// Mutual endorsement: node m receives one unit from every other active coalition member.
inline void mutual_boost(Coalition const &c, double unit, std::vector<Perturbation> &out)
{
  for (auto const m : c.malicious)
  {
    std::size_t const others = c.active.size() - (contains(c.active, m) ? 1 : 0);
    if (others > 0)
    {
      out.push_back({m, Perturbation::Kind::BoostAlpha, static_cast<double>(others) * unit, 0});
    }
  }
}

}  // namespace attack_detail

/// Bits of the 16-feature observation derived from per-node trust values.
inline constexpr std::uint32_t kTrustFeatureMask =
    (1u << 0) | (1u << 1) | (1u << 2) | (1u << 3) | (1u << 4) | (1u << 5) | (1u << 6) | (1u << 10) | (1u << 11) |
    (1u << 15);

inline double sybil_amplify(double magnitude, AttackConfig const &cfg) noexcept
{
  return magnitude * static_cast<double>(cfg.bfi_sybil_k);
}

/// Naive: each active malicious node independently smears one random honest node.
inline std::vector<Perturbation> nma_step(AttackConfig const &cfg, AttackState const &, StepContext const &ctx, Rng &rng)
{
  auto const                c = attack_detail::split(ctx);
  std::vector<Perturbation> out;
  if (c.honest.empty())
  {
    return out;
  }
  for ([[maybe_unused]] auto const m : c.active)
  {
    if (rng.bernoulli(cfg.nma_p_attack))
    {
      out.push_back({c.honest[rng.index(c.honest.size())], Perturbation::Kind::PenalizeBeta,
                     cfg.nma_noise * cfg.base_evidence, 0});
    }
  }
  return out;
}

/// Collusive rumours: on every period-th step the coalition endorses itself and
/// smears the top quarter of honest nodes.
inline std::vector<Perturbation> cra_step(AttackConfig const &cfg, AttackState const &, StepContext const &ctx, Rng &)
{
  std::vector<Perturbation> out;
  if (ctx.net.step_index % cfg.cra_period != 0)
  {
    return out;
  }
  auto const c = attack_detail::split(ctx);
  if (c.active.empty())
  {
    return out;
  }
  double const unit = cfg.cra_intensity * cfg.base_evidence;
  attack_detail::mutual_boost(c, unit, out);
  auto const targets =
      attack_detail::top_honest(ctx.net, c.honest, attack_detail::ceil_fraction(cfg.cra_target_fraction, c.honest.size()));
  for (auto const h : targets)
  {
    out.push_back({h, Perturbation::Kind::PenalizeBeta, static_cast<double>(c.active.size()) * unit, 0});
  }
  return out;
}

/// Strategy pick for the adaptive attacker: explore with probability eps, else
/// the best tracked score (lowest index on ties).
inline std::size_t aaa_choose(std::span<double const> scores, double eps, Rng &rng)
{
  if (rng.uniform() < eps)
  {
    return rng.index(scores.size());
  }
  return static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

struct AaaResult
{
  std::vector<Perturbation> perturbations;
  AttackState               state;
  AaaStrategy               strategy;
};

/// Adaptive: credits the previous strategy with the change in mean malicious
/// trust since it was played, picks the next one epsilon-greedily, then decays epsilon.
inline AaaResult aaa_step(AttackConfig const &cfg, AttackState state, StepContext const &ctx, Rng &rng)
{
  auto const   c    = attack_detail::split(ctx);
  double const mean = attack_detail::mean_trust(ctx.net, c.malicious);
  if (state.aaa_last)
  {
    std::size_t const last = *state.aaa_last;
    state.aaa_counts[last] += 1;
    state.aaa_scores[last] += ((mean - state.aaa_last_mean) - state.aaa_scores[last]) /
                              static_cast<double>(state.aaa_counts[last]);
  }

  std::size_t const pick = aaa_choose(state.aaa_scores, state.aaa_eps, rng);
  state.aaa_eps *= cfg.aaa_eps_decay;
  state.aaa_last      = pick;
  state.aaa_last_mean = mean;

  std::vector<Perturbation> out;
  double const              unit = cfg.aaa_factor * cfg.base_evidence;
  double const              coalition = static_cast<double>(c.active.size());
  if (!c.active.empty())
  {
    switch (static_cast<AaaStrategy>(pick))
    {
    case AaaStrategy::GradientExploitation: {
      // Shore up whichever member sits closest to detection.
      auto const weakest = *std::min_element(c.active.begin(), c.active.end(), [&](std::size_t a, std::size_t b) {
        return trust_score(ctx.net.profiles[a]) < trust_score(ctx.net.profiles[b]);
      });
      out.push_back({weakest, Perturbation::Kind::BoostAlpha, unit * coalition, 0});
      break;
    }
    case AaaStrategy::SlowPoisoning:
      for (auto const h : c.honest)
      {
        out.push_back({h, Perturbation::Kind::PenalizeBeta, unit, 0});
      }
      break;
    case AaaStrategy::StrategicCooperation:
      attack_detail::mutual_boost(c, unit, out);
      break;
    case AaaStrategy::Mimicry: {
      auto const top = attack_detail::top_honest(ctx.net, c.honest, 1);
      double const source = top.empty() ? 0.5 : trust_score(ctx.net.profiles[top.front()]);
      for (auto const m : c.active)
      {
        out.push_back({m, Perturbation::Kind::BoostAlpha, unit * source, 0});
      }
      break;
    }
    case AaaStrategy::TemporalCoordination:
      if (ctx.net.step_index % cfg.aaa_burst_period == 0)
      {
        for (auto const h : attack_detail::top_honest(ctx.net, c.honest, 1))
        {
          out.push_back({h, Perturbation::Kind::PenalizeBeta, unit * coalition, 0});
        }
      }
      break;
    }
  }
  return {std::move(out), std::move(state), static_cast<AaaStrategy>(pick)};
}

inline BfiPhase bfi_phase(double mean_byzantine_trust, AttackConfig const &cfg) noexcept
{
  if (mean_byzantine_trust > cfg.bfi_aggressive_above)
  {
    return BfiPhase::Aggressive;
  }
  if (mean_byzantine_trust < cfg.bfi_recovery_below)
  {
    return BfiPhase::Recovery;
  }
  return BfiPhase::Strategic;
}

inline double bfi_equivocation_rate(BfiPhase phase, AttackConfig const &cfg) noexcept
{
  return phase == BfiPhase::Recovery ? cfg.bfi_recovery_rate : cfg.bfi_equivocation_rate;
}

struct AttackStepResult
{
  std::vector<Perturbation> perturbations;
  AttackState               state;
};

/// Byzantine: equivocating delegates, Sybil-amplified coordinated strikes on
/// the top honest node every window, and a standing eclipse victim whose
/// contribution to the observation is forged.
inline AttackStepResult bfi_step(AttackConfig const &cfg, AttackState state, StepContext const &ctx, Rng &rng)
{
  auto const   c    = attack_detail::split(ctx);
  double const mean = attack_detail::mean_trust(ctx.net, c.malicious);
  state.bfi_phase   = bfi_phase(mean, cfg);

  std::vector<Perturbation> out;
  double const              rate = bfi_equivocation_rate(state.bfi_phase, cfg);
  for (auto const d : ctx.delegates)
  {
    if (ctx.net.roles[d].malicious() && rng.bernoulli(rate))
    {
      out.push_back({d, Perturbation::Kind::MarkConflicting, 1.0, 0});
    }
  }

  // Aggressive mode strikes twice as often.
  std::uint64_t const window =
      state.bfi_phase == BfiPhase::Aggressive ? std::max<std::uint64_t>(1, (cfg.bfi_window + 1) / 2) : cfg.bfi_window;
  if (ctx.net.step_index % window == 0 && !c.active.empty())
  {
    auto const top = attack_detail::top_honest(ctx.net, c.honest, 1);
    for (std::size_t j = 0; j < c.active.size() && !top.empty(); ++j)
    {
      out.push_back({top.front(), Perturbation::Kind::PenalizeBeta, sybil_amplify(cfg.base_evidence, cfg), 0});
    }
  }

  if (!state.bfi_eclipse_target && !c.honest.empty())
  {
    state.bfi_eclipse_target = c.honest[rng.index(c.honest.size())];
  }
  if (state.bfi_eclipse_target && !c.active.empty())
  {
    // The victim is shown a trust value matching the Byzantine average.
    double const forged = std::clamp(mean, 0.01, 0.99);
    out.push_back({*state.bfi_eclipse_target, Perturbation::Kind::CorruptObservation, forged, kTrustFeatureMask});
  }
  return {std::move(out), std::move(state)};
}

/// Sleeper agents: silent until the activation episode, then smear the top
/// share of honest nodes every step while endorsing one another.
inline AttackStepResult tdp_step(AttackConfig const &cfg, AttackState state, StepContext const &ctx, double delta_valid,
                                 Rng &)
{
  if (ctx.net.episode_index >= cfg.tdp_activation_episode)
  {
    state.tdp_activated = true;
  }
  std::vector<Perturbation> out;
  if (!state.tdp_activated)
  {
    state.tdp_targets.clear();
    return {std::move(out), std::move(state)};
  }
  auto const c = attack_detail::split(ctx);
  if (c.active.empty())
  {
    state.tdp_targets.clear();
    return {std::move(out), std::move(state)};
  }
  state.tdp_targets =
      attack_detail::top_honest(ctx.net, c.honest, attack_detail::ceil_fraction(cfg.tdp_target_ratio, c.honest.size()));
  double const hit = static_cast<double>(c.active.size()) * cfg.tdp_intensity * cfg.base_evidence;
  for (auto const h : state.tdp_targets)
  {
    out.push_back({h, Perturbation::Kind::PenalizeBeta, hit, 0});
  }
  attack_detail::mutual_boost(c, delta_valid, out);
  return {std::move(out), std::move(state)};
}

struct AttackOutput
{
  std::vector<Perturbation> perturbations;  // feedback, equivocation flags and observation forgeries
  VoteBehavior              votes;
};

/// One attack instance per simulation; owns the family's memory.
class Adversary
{
public:
  explicit Adversary(AttackConfig cfg, double delta_valid = 1.0)
    : cfg_{std::move(cfg)}, state_{AttackState::initial(cfg_)}, delta_valid_{delta_valid}
  {
    cfg_.validate();
  }

  AttackConfig const &config() const noexcept { return cfg_; }
  AttackState const  &state() const noexcept { return state_; }
  AttackFamily        family() const noexcept { return cfg_.family; }

  void reset() { state_ = AttackState::initial(cfg_); }

  /// Identities per node for delegate selection (Sybil nodes field several).
  std::vector<unsigned> identities(NetworkState const &net, std::span<bool const> active) const
  {
    std::vector<unsigned> ids(net.size(), 1u);
    if (cfg_.family == AttackFamily::BFI)
    {
      for (std::size_t i = 0; i < net.size(); ++i)
      {
        if (net.roles[i].malicious() && (active.empty() || active[i]))
        {
          ids[i] = cfg_.bfi_sybil_k;
        }
      }
    }
    return ids;
  }

  AttackOutput step(StepContext const &ctx, Rng &rng)
  {
    AttackOutput out;
    out.votes.detection_probability = cfg_.detection_probability;
    switch (cfg_.family)
    {
    case AttackFamily::None:
      break;
    case AttackFamily::NMA:
      out.perturbations = nma_step(cfg_, state_, ctx, rng);
      break;
    case AttackFamily::CRA:
      out.perturbations = cra_step(cfg_, state_, ctx, rng);
      break;
    case AttackFamily::AAA: {
      auto r            = aaa_step(cfg_, std::move(state_), ctx, rng);
      state_            = std::move(r.state);
      out.perturbations = std::move(r.perturbations);
      break;
    }
    case AttackFamily::BFI: {
      auto r            = bfi_step(cfg_, std::move(state_), ctx, rng);
      state_            = std::move(r.state);
      out.perturbations = std::move(r.perturbations);
      break;
    }
    case AttackFamily::TDP: {
      auto r            = tdp_step(cfg_, std::move(state_), ctx, delta_valid_, rng);
      state_            = std::move(r.state);
      out.perturbations = std::move(r.perturbations);
      // Activated sleepers keep blocks flowing so their feedback gets committed.
      if (state_.tdp_activated)
      {
        out.votes.malicious_stance = Vote::Valid;
      }
      break;
    }
    }
    for (auto const &p : out.perturbations)
    {
      if (p.kind == Perturbation::Kind::MarkConflicting)
      {
        out.votes.conflicting.push_back(p.target);
      }
    }
    return out;
  }

private:
  AttackConfig cfg_;
  AttackState  state_;
  double       delta_valid_;
};

}  // namespace trustsim
