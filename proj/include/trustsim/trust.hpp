#pragma once

// Bayesian trust profiles and Thompson-sampling delegate selection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "trustsim/random.hpp"

namespace trustsim {

/// Beta evidence pair for one node. Both masses stay strictly positive.
struct TrustProfile
{
  double alpha{8.0};
  double beta{8.0};

  bool valid() const noexcept
  {
    return std::isfinite(alpha) && std::isfinite(beta) && alpha > 0.0 && beta > 0.0;
  }

  friend bool operator==(TrustProfile const &, TrustProfile const &) = default;
};

enum class Evidence
{
  Valid,
  Invalid,
  Malicious
};

struct TrustUpdateConfig
{
  double delta_valid{1.0};
  double delta_invalid{1.0};
  double delta_malicious{2.0};
  double decay_gamma{0.9};

  void validate() const
  {
    if (!(delta_valid > 0.0) || !(delta_invalid > 0.0) || !(delta_malicious > 0.0))
    {
      throw std::invalid_argument("trust deltas must be positive");
    }
    if (!(decay_gamma > 0.0 && decay_gamma < 1.0))
    {
      throw std::invalid_argument("decay_gamma must lie in (0, 1)");
    }
  }
};

inline double trust_score(TrustProfile const &p) noexcept
{
  return p.alpha / (p.alpha + p.beta);
}

inline TrustProfile apply_evidence(TrustProfile p, Evidence kind, TrustUpdateConfig const &cfg) noexcept
{
  switch (kind)
  {
  case Evidence::Valid:
    p.alpha += cfg.delta_valid;
    break;
  case Evidence::Invalid:
    p.beta += cfg.delta_invalid;
    break;
  case Evidence::Malicious:
    p.beta += cfg.delta_malicious;
    p.alpha *= cfg.decay_gamma;
    break;
  }
  return p;
}

/// Committee sizing: k = max(1, round-half-up(ratio * N)).
class DelegationPolicy
{
public:
  static constexpr double kMinRatio = 0.1;
  static constexpr double kMaxRatio = 1.0;

  DelegationPolicy(double ratio, std::size_t node_count) : ratio_{ratio}, node_count_{node_count}
  {
    if (node_count == 0)
    {
      throw std::invalid_argument("DelegationPolicy: node_count must be positive");
    }
    if (!(ratio >= kMinRatio && ratio <= kMaxRatio))
    {
      throw std::invalid_argument("DelegationPolicy: ratio outside [0.1, 1.0]");
    }
  }

  double      ratio() const noexcept { return ratio_; }
  std::size_t node_count() const noexcept { return node_count_; }

  std::size_t committee_size() const noexcept
  {
    auto const k = static_cast<std::size_t>(std::floor(ratio_ * static_cast<double>(node_count_) + 0.5));
    return std::clamp<std::size_t>(k, 1, node_count_);
  }

private:
  double      ratio_;
  std::size_t node_count_;
};

namespace detail {

// Draws one Thompson sample per node (the max over its identities when a node
// fields several) and returns the indices of the `k` largest, ascending.
inline std::vector<std::size_t> top_k_by_sample(std::span<TrustProfile const> profiles,
                                                std::span<std::size_t const>  candidates,
                                                std::span<unsigned const> identities, std::size_t k, Rng &rng)
{
  std::vector<std::pair<double, std::size_t>> draws;
  draws.reserve(candidates.size());
  for (auto const i : candidates)
  {
    unsigned const copies = identities.empty() ? 1u : std::max(1u, identities[i]);
    double         best   = 0.0;
    for (unsigned c = 0; c < copies; ++c)
    {
      best = std::max(best, rng.beta(profiles[i].alpha, profiles[i].beta));
    }
    draws.emplace_back(best, i);
  }
  k = std::min(k, draws.size());
  // Larger sample first; equal samples fall back to the lower index.
  std::partial_sort(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(k), draws.end(),
                    [](auto const &a, auto const &b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j)
  {
    out.push_back(draws[j].second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

/// Thompson sampling: one Beta draw per node, committee = the k largest draws.
inline std::vector<std::size_t> select_delegates(std::span<TrustProfile const> profiles, DelegationPolicy const &policy,
                                                 Rng &rng)
{
  if (profiles.empty())
  {
    throw std::invalid_argument("select_delegates: no profiles");
  }
  std::vector<std::size_t> all(profiles.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return detail::top_k_by_sample(profiles, all, {}, policy.committee_size(), rng);
}

/// Restricted variant used by the environment: only `candidates` may serve, and
/// a node with several identities gets one draw per identity. The committee is
/// truncated when fewer candidates than k exist.
inline std::vector<std::size_t> select_delegates(std::span<TrustProfile const> profiles, DelegationPolicy const &policy,
                                                 std::span<std::size_t const> candidates,
                                                 std::span<unsigned const> identities, Rng &rng)
{
  if (profiles.empty())
  {
    throw std::invalid_argument("select_delegates: no profiles");
  }
  if (!identities.empty() && identities.size() != profiles.size())
  {
    throw std::invalid_argument("select_delegates: identity count size mismatch");
  }
  return detail::top_k_by_sample(profiles, candidates, identities, policy.committee_size(), rng);
}

}  // namespace trustsim
