#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string_view>
#include <unordered_map>

#include "trustsim/agents/agent.hpp"
#include "trustsim/agents/checkpoint.hpp"
#include "trustsim/agents/exploration.hpp"
#include "trustsim/random.hpp"
#include "trustsim/state.hpp"

namespace trustsim {

struct DiscretizationSpec
{
  std::array<FeatureRange, kFeatureCount> ranges{feature_ranges()};
  std::array<std::uint32_t, kFeatureCount> bins{};

  /// 10 bins for mean trust, variance and collusion score; 5 for the rest.
  static DiscretizationSpec standard(double kappa_max = 10.0)
  {
    DiscretizationSpec s;
    s.ranges = feature_ranges(kappa_max);
    s.bins.fill(5);
    s.bins[static_cast<std::size_t>(Feature::MeanTrust)]      = 10;
    s.bins[static_cast<std::size_t>(Feature::Variance)]       = 10;
    s.bins[static_cast<std::size_t>(Feature::CollusionScore)] = 10;
    return s;
  }
};

inline std::uint32_t bin_of(double value, FeatureRange r, std::uint32_t bins) noexcept
{
  double const frac = std::clamp((value - r.lo) / (r.hi - r.lo), 0.0, 1.0);
  auto const   b    = static_cast<std::uint32_t>(std::floor(frac * bins));
  return std::min(b, bins - 1);
}

using StateKey = std::uint64_t;

/// Mixed-radix encoding of the per-feature bins.
inline StateKey discretize(StateVector const &s, DiscretizationSpec const &spec)
{
  StateKey key = 0;
  for (std::size_t i = 0; i < kFeatureCount; ++i)
  {
    key = key * spec.bins[i] + bin_of(s.values[i], spec.ranges[i], spec.bins[i]);
  }
  return key;
}

using QValues = std::array<double, kActionCount>;

class QTable
{
public:
  QValues get(StateKey k) const
  {
    auto it = table_.find(k);
    return it == table_.end() ? QValues{} : it->second;
  }

  QValues &at(StateKey k) { return table_[k]; }

  std::size_t size() const noexcept { return table_.size(); }

  std::unordered_map<StateKey, QValues> const &entries() const noexcept { return table_; }

private:
  std::unordered_map<StateKey, QValues> table_;
};

/// Q(s,a) += lr * (r + discount * max_a' Q(s',a') - Q(s,a)); terminal transitions drop the bootstrap.
inline void tabular_update(QTable &q, StateKey s, Action a, double r, StateKey s_next, bool terminal, double lr,
                           double discount)
{
  auto const next   = q.get(s_next);
  double const best = terminal ? 0.0 : *std::max_element(next.begin(), next.end());
  double &cell      = q.at(s)[index_of(a)];
  cell += lr * (r + discount * best - cell);
}

class TabularAgent final : public Agent
{
public:
  TabularAgent(AgentHyperparams hp, std::uint64_t seed, DiscretizationSpec spec = DiscretizationSpec::standard())
    : hp_{(hp.validate(), hp)}
    , spec_{spec}
    , schedule_{hp_.eps_start, hp_.eps_min, hp_.total_episodes, hp_.eps_reach_fraction}
    , rng_{seed}
    , seed_{seed}
    , eps_{hp_.eps_start}
  {}

  std::string_view name() const noexcept override { return "rl"; }

  void   begin_episode(std::uint64_t episode) override { eps_ = schedule_.at(episode); }
  double epsilon() const noexcept override { return eps_; }

  Action act(StateVector const &s) override { return epsilon_greedy(q_.get(discretize(s, spec_)), eps_, rng_); }

  void observe(Transition const &t) override
  {
    tabular_update(q_, discretize(t.state, spec_), t.action, t.reward, discretize(t.next_state, spec_), t.terminal,
                   hp_.tabular_lr, hp_.discount);
  }

  QTable const &table() const noexcept { return q_; }

  QValues q_values(StateVector const &s) const { return q_.get(discretize(s, spec_)); }

  // Header: seed, lr, discount, eps_start, eps_min, then per-feature bins, then
  // entry count followed by (key u64, three f64) per entry in ascending key order.
  void save(std::ostream &out) const override
  {
    ckpt::write_header(out, ckpt::Kind::Tabular);
    ckpt::put_u64(out, seed_);
    for (double v : {hp_.tabular_lr, hp_.discount, hp_.eps_start, hp_.eps_min})
    {
      ckpt::put_f64(out, v);
    }
    for (auto b : spec_.bins)
    {
      ckpt::put_u32(out, b);
    }
    std::map<StateKey, QValues> const sorted(q_.entries().begin(), q_.entries().end());
    ckpt::put_u64(out, sorted.size());
    for (auto const &[k, v] : sorted)
    {
      ckpt::put_u64(out, k);
      for (double x : v)
      {
        ckpt::put_f64(out, x);
      }
    }
  }

  void load(std::istream &in) override
  {
    ckpt::read_header(in, ckpt::Kind::Tabular);
    seed_ = ckpt::get_u64(in);
    for (int i = 0; i < 4; ++i)
    {
      ckpt::get_f64(in);
    }
    for (auto &b : spec_.bins)
    {
      b = ckpt::get_u32(in);
      if (b == 0)
      {
        throw ckpt::FormatError("zero bin count in checkpoint");
      }
    }
    QTable     q;
    auto const n = ckpt::get_u64(in);
    for (std::uint64_t i = 0; i < n; ++i)
    {
      auto  k    = ckpt::get_u64(in);
      auto &cell = q.at(k);
      for (auto &x : cell)
      {
        x = ckpt::get_f64(in);
      }
    }
    q_ = std::move(q);
  }

private:
  AgentHyperparams   hp_;
  DiscretizationSpec spec_;
  EpsilonSchedule    schedule_;
  QTable             q_;
  Rng                rng_;
  std::uint64_t      seed_;
  double             eps_;
};

}  // namespace trustsim
