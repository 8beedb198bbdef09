#pragma once

// The 16-feature observation and the three-way delegation action.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string_view>
#include <vector>

#include "trustsim/consensus.hpp"

namespace trustsim {

enum class Feature : std::size_t
{
  MeanTrust = 0,
  Variance,
  Skewness,
  Median,
  Range,
  Iqr,
  CoeffVariation,
  VerifiedTxNorm,
  ChainLengthNorm,
  HonestMaliciousRatio,
  LowTrustFrac,
  HighTrustFrac,
  DelegationEfficiency,
  ThroughputRate,
  RecentBlockRate,
  CollusionScore,
};

inline constexpr std::size_t kFeatureCount = 16;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames{
    "mean_trust",     "variance",          "skewness",           "median",
    "range",          "iqr",               "coeff_variation",    "verified_tx_norm",
    "chain_length_norm", "honest_malicious_ratio", "low_trust_frac", "high_trust_frac",
    "delegation_efficiency", "throughput_rate", "recent_block_rate", "collusion_score",
};

struct StateVector
{
  std::array<double, kFeatureCount> values{};

  double  operator[](Feature f) const noexcept { return values[static_cast<std::size_t>(f)]; }
  double &operator[](Feature f) noexcept { return values[static_cast<std::size_t>(f)]; }

  bool finite() const noexcept
  {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(StateVector const &, StateVector const &) = default;
};

enum class Action : std::uint8_t
{
  Decrease = 0,
  Maintain = 1,
  Increase = 2,
};

inline constexpr std::size_t kActionCount = 3;

inline constexpr double multiplier(Action a) noexcept
{
  switch (a)
  {
  case Action::Decrease:
    return 0.9;
  case Action::Maintain:
    return 1.0;
  case Action::Increase:
    return 1.1;
  }
  return 1.0;
}

inline constexpr std::size_t index_of(Action a) noexcept { return static_cast<std::size_t>(a); }

inline constexpr Action action_at(std::size_t i) noexcept { return static_cast<Action>(i); }

inline double apply_action(double ratio, Action a) noexcept
{
  return std::clamp(ratio * multiplier(a), 0.1, 1.0);
}

// ---------------------------------------------------------------------------
// Order statistics

struct TrustStats
{
  double mean{0.0};
  double variance{0.0};  // sample (n - 1)
  double skewness{0.0};  // adjusted Fisher-Pearson; 0 when variance is 0
  double median{0.0};
  double range{0.0};
  double iqr{0.0};
  double cv{0.0};
};

/// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(std::span<double const> sorted, double p)
{
  if (sorted.empty())
  {
    return 0.0;
  }
  double const      h  = p * static_cast<double>(sorted.size() - 1);
  std::size_t const lo = static_cast<std::size_t>(std::floor(h));
  std::size_t const hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline TrustStats trust_stats(std::span<double const> xs)
{
  TrustStats s;
  std::size_t const n = xs.size();
  if (n == 0)
  {
    return s;
  }
  double sum = 0.0;
  for (double x : xs)
  {
    sum += x;
  }
  s.mean    = sum / static_cast<double>(n);
  double m2 = 0.0, m3 = 0.0;
  for (double x : xs)
  {
    double const d = x - s.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  s.variance = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  // Tiny m2 from rounding noise is treated as a degenerate distribution.
  if (n > 2 && m2 > 1e-24)
  {
    double const g1 = m3 / std::pow(m2, 1.5);
    s.skewness      = g1 * std::sqrt(static_cast<double>(n) * static_cast<double>(n - 1)) / static_cast<double>(n - 2);
  }
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  s.median = quantile_sorted(sorted, 0.5);
  s.range  = sorted.back() - sorted.front();
  s.iqr    = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  s.cv     = s.mean == 0.0 ? 0.0 : std::sqrt(s.variance) / s.mean;
  return s;
}

/// kappa = 1 / |mean honest trust - mean malicious trust|, capped at kappa_max.
/// Zero when either class is empty.
inline double collusion_kappa(std::span<double const> trusts, std::span<NodeRole const> roles, double kappa_max)
{
  double      hs = 0.0, ms = 0.0;
  std::size_t hn = 0, mn = 0;
  for (std::size_t i = 0; i < trusts.size(); ++i)
  {
    if (roles[i].malicious())
    {
      ms += trusts[i];
      ++mn;
    }
    else
    {
      hs += trusts[i];
      ++hn;
    }
  }
  if (hn == 0 || mn == 0)
  {
    return 0.0;
  }
  double const gap = std::abs(hs / static_cast<double>(hn) - ms / static_cast<double>(mn));
  if (gap < 1.0 / kappa_max)
  {
    return kappa_max;
  }
  return std::min(1.0 / gap, kappa_max);
}

// ---------------------------------------------------------------------------
// Feature extraction

struct RoundSummary
{
  bool          block_created{false};
  std::uint64_t verified_tx{0};
  std::size_t   delegates{0};
};

/// Sliding window of recent rounds (most recent at the back).
class RoundHistory
{
public:
  explicit RoundHistory(std::size_t window = 10) : window_{window} {}

  void push(RoundSummary r)
  {
    rounds_.push_back(r);
    while (rounds_.size() > window_)
    {
      rounds_.pop_front();
    }
  }

  void clear() { rounds_.clear(); }

  std::deque<RoundSummary> const &rounds() const noexcept { return rounds_; }
  std::size_t                     window() const noexcept { return window_; }

private:
  std::size_t              window_;
  std::deque<RoundSummary> rounds_;
};

struct ObservationConfig
{
  std::uint64_t steps{100};
  std::uint64_t batch_size{10};
  double        kappa_max{10.0};
  double        low_cutoff{0.3};
  double        high_cutoff{0.7};
  double        theta{0.45};
};

/// A forged trust value shown to the defender in place of a node's real one.
struct ObservationForgery
{
  std::size_t node;
  double      value;
};

inline StateVector extract_state(NetworkState const &net, RoundHistory const &history, ObservationConfig const &cfg,
                                 std::span<ObservationForgery const> forgeries = {})
{
  std::vector<double> trusts = net.trusts();
  std::vector<double> const truth = trusts;
  for (auto const &f : forgeries)
  {
    if (f.node < trusts.size())
    {
      trusts[f.node] = f.value;
    }
  }

  StateVector s;
  auto const  st = trust_stats(trusts);
  s[Feature::MeanTrust]      = st.mean;
  s[Feature::Variance]       = st.variance;
  s[Feature::Skewness]       = st.skewness;
  s[Feature::Median]         = st.median;
  s[Feature::Range]          = st.range;
  s[Feature::Iqr]            = st.iqr;
  s[Feature::CoeffVariation] = st.cv;

  double const tx_cap    = static_cast<double>(std::max<std::uint64_t>(1, cfg.steps * cfg.batch_size));
  double const chain_cap = static_cast<double>(std::max<std::uint64_t>(1, cfg.steps));
  s[Feature::VerifiedTxNorm]  = std::clamp(static_cast<double>(net.verified_tx_total) / tx_cap, 0.0, 1.0);
  s[Feature::ChainLengthNorm] = std::clamp(static_cast<double>(net.chain_length) / chain_cap, 0.0, 1.0);

  // Ground-truth share of honest nodes among those currently above the threshold.
  std::size_t trusted = 0, trusted_honest = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
  {
    if (truth[i] >= cfg.theta)
    {
      ++trusted;
      trusted_honest += net.roles[i].malicious() ? 0 : 1;
    }
  }
  s[Feature::HonestMaliciousRatio] =
      trusted == 0 ? 0.0 : static_cast<double>(trusted_honest) / static_cast<double>(trusted);

  std::size_t low = 0, high = 0;
  for (double t : trusts)
  {
    low += t < cfg.low_cutoff ? 1 : 0;
    high += t > cfg.high_cutoff ? 1 : 0;
  }
  double const n             = static_cast<double>(std::max<std::size_t>(1, trusts.size()));
  s[Feature::LowTrustFrac]   = static_cast<double>(low) / n;
  s[Feature::HighTrustFrac]  = static_cast<double>(high) / n;

  auto const &rounds = history.rounds();
  if (!rounds.empty())
  {
    auto const &last = rounds.back();
    s[Feature::DelegationEfficiency] =
        last.delegates == 0 ? 0.0
                            : std::clamp(static_cast<double>(last.verified_tx) / static_cast<double>(last.delegates) /
                                             static_cast<double>(cfg.batch_size),
                                         0.0, 1.0);
    double tx = 0.0, blocks = 0.0;
    for (auto const &r : rounds)
    {
      tx += static_cast<double>(r.verified_tx);
      blocks += r.block_created ? 1.0 : 0.0;
    }
    double const w               = static_cast<double>(rounds.size());
    s[Feature::ThroughputRate]   = std::clamp(tx / (w * static_cast<double>(cfg.batch_size)), 0.0, 1.0);
    s[Feature::RecentBlockRate]  = blocks / w;
  }

  s[Feature::CollusionScore] = collusion_kappa(trusts, net.roles, cfg.kappa_max);
  return s;
}

/// Declared value range per feature; used for discretization and network input scaling.
struct FeatureRange
{
  double lo;
  double hi;
};

inline std::array<FeatureRange, kFeatureCount> feature_ranges(double kappa_max = 10.0)
{
  return {{
      {0.0, 1.0},    // mean_trust
      {0.0, 0.12},   // variance
      {-3.0, 3.0},   // skewness
      {0.0, 1.0},    // median
      {0.0, 1.0},    // range
      {0.0, 1.0},    // iqr
      {0.0, 2.0},    // coeff_variation
      {0.0, 1.0},    // verified_tx_norm
      {0.0, 1.0},    // chain_length_norm
      {0.0, 1.0},    // honest_malicious_ratio
      {0.0, 1.0},    // low_trust_frac
      {0.0, 1.0},    // high_trust_frac
      {0.0, 1.0},    // delegation_efficiency
      {0.0, 1.0},    // throughput_rate
      {0.0, 1.0},    // recent_block_rate
      {0.0, kappa_max},  // collusion_score
  }};
}

/// Each feature mapped linearly onto [0, 1] by its declared range, clamped.
inline std::array<double, kFeatureCount> normalized(StateVector const &s, double kappa_max = 10.0)
{
  auto const                        ranges = feature_ranges(kappa_max);
  std::array<double, kFeatureCount> out{};
  for (std::size_t i = 0; i < kFeatureCount; ++i)
  {
    out[i] = std::clamp((s.values[i] - ranges[i].lo) / (ranges[i].hi - ranges[i].lo), 0.0, 1.0);
  }
  return out;
}

}  // namespace trustsim
