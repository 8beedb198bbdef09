#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "trustsim/random.hpp"
#include "trustsim/state.hpp"

namespace trustsim {

struct AgentHyperparams
{
  double        tabular_lr{0.1};
  double        deep_lr{5e-4};
  double        discount{0.99};
  double        eps_start{1.0};
  double        eps_min{0.05};
  double        eps_reach_fraction{0.8};  // share of episodes after which eps sits at eps_min
  std::uint64_t total_episodes{50};
  std::size_t   buffer_capacity{10000};
  std::size_t   batch_size{64};
  std::size_t   hidden1{128};
  std::size_t   hidden2{64};
  std::size_t   head_hidden{32};
  std::uint64_t target_sync_every{100};
  std::uint64_t marl_sync_every{10};
  std::size_t   marl_agents{16};
  double        reward_scale{0.01};  // deep agents only
  double        td_clip{10.0};       // <= 0 disables clipping
  bool          clip_td{true};

  void validate() const
  {
    if (!(discount > 0.0 && discount <= 1.0))
    {
      throw std::invalid_argument("discount must lie in (0, 1]");
    }
    if (!(eps_min >= 0.0 && eps_min <= eps_start && eps_start <= 1.0))
    {
      throw std::invalid_argument("need 0 <= eps_min <= eps_start <= 1");
    }
    if (!(eps_reach_fraction > 0.0 && eps_reach_fraction <= 1.0))
    {
      throw std::invalid_argument("eps_reach_fraction must lie in (0, 1]");
    }
    if (batch_size == 0 || batch_size > buffer_capacity)
    {
      throw std::invalid_argument("batch_size must lie in [1, buffer_capacity]");
    }
    if (total_episodes == 0 || target_sync_every == 0 || marl_sync_every == 0 || marl_agents == 0)
    {
      throw std::invalid_argument("episode count, sync periods and agent count must be positive");
    }
    if (!(tabular_lr > 0.0) || !(deep_lr > 0.0) || !(reward_scale > 0.0))
    {
      throw std::invalid_argument("learning rates and reward scale must be positive");
    }
    if (hidden1 == 0 || hidden2 == 0 || head_hidden == 0)
    {
      throw std::invalid_argument("hidden sizes must be positive");
    }
  }
};

/// Multiplicative per-episode decay reaching eps_min after the configured share of episodes.
class EpsilonSchedule
{
public:
  EpsilonSchedule(double start, double min, std::uint64_t total_episodes, double reach_fraction = 0.8)
    : start_{start}, min_{min}
  {
    double const reach = std::max(1.0, std::round(reach_fraction * static_cast<double>(total_episodes)) - 1.0);
    decay_             = start > 0.0 && min > 0.0 ? std::pow(min / start, 1.0 / reach) : 0.0;
  }

  /// Exploration rate for a 1-based episode number.
  double at(std::uint64_t episode) const noexcept
  {
    if (episode <= 1)
    {
      return start_;
    }
    return std::max(min_, start_ * std::pow(decay_, static_cast<double>(episode - 1)));
  }

  double decay() const noexcept { return decay_; }

private:
  double start_;
  double min_;
  double decay_{1.0};
};

/// Index of the largest value; ties go to the lowest index.
template <typename Range>
std::size_t argmax(Range const &q)
{
  std::size_t best = 0;
  std::size_t i    = 0;
  for (auto const v : q)
  {
    if (v > q[best])
    {
      best = i;
    }
    ++i;
  }
  return best;
}

template <typename Range>
Action epsilon_greedy(Range const &q, double eps, Rng &rng)
{
  if (rng.uniform() < eps)
  {
    return action_at(rng.index(kActionCount));
  }
  return action_at(argmax(q));
}

}  // namespace trustsim
