#pragma once

// Dueling double DQN and its parameter-sharing multi-agent variant.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "trustsim/agents/agent.hpp"
#include "trustsim/agents/checkpoint.hpp"
#include "trustsim/agents/exploration.hpp"
#include "trustsim/agents/network.hpp"
#include "trustsim/agents/replay.hpp"
#include "trustsim/random.hpp"
#include "trustsim/state.hpp"

namespace trustsim {

/// Network input: every feature scaled onto [0, 1] by its declared range.
inline Vec encode(StateVector const &s)
{
  auto const n = normalized(s);
  Vec        v(static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t i = 0; i < kFeatureCount; ++i)
  {
    v[static_cast<Eigen::Index>(i)] = n[i];
  }
  return v;
}

inline Topology topology_of(AgentHyperparams const &hp)
{
  return Topology{kFeatureCount, {hp.hidden1, hp.hidden2}, hp.head_hidden, kActionCount};
}

/// r if terminal, else r + discount * Q_target(s', argmax_a Q_online(s', a)).
inline double double_q_target(double r, Vec const &s_next, bool terminal, DuelingNetwork const &online,
                              DuelingNetwork const &target, double discount)
{
  if (terminal)
  {
    return r;
  }
  Vec const         q_online = online.forward_one(s_next);
  Eigen::Index      best     = 0;
  for (Eigen::Index a = 1; a < q_online.size(); ++a)
  {
    if (q_online[a] > q_online[best])
    {
      best = a;
    }
  }
  return r + discount * target.forward_one(s_next)[best];
}

struct TrainSettings
{
  double discount{0.99};
  double reward_scale{1.0};
  double td_clip{10.0};
  bool   clip_td{true};

  static TrainSettings from(AgentHyperparams const &hp)
  {
    return {hp.discount, hp.reward_scale, hp.td_clip, hp.clip_td};
  }
};

/// One Adam step on the mean squared (optionally clipped) TD error of `batch`.
/// Returns the loss before the update.
inline double train_on_batch(DuelingNetwork &net, DuelingNetwork const &target, Adam &opt,
                             std::span<Transition const *const> batch, TrainSettings const &ts)
{
  auto const B = static_cast<Eigen::Index>(batch.size());
  auto const F = static_cast<Eigen::Index>(kFeatureCount);
  Mat        s(F, B), s2(F, B);
  for (Eigen::Index j = 0; j < B; ++j)
  {
    s.col(j)  = encode(batch[static_cast<std::size_t>(j)]->state);
    s2.col(j) = encode(batch[static_cast<std::size_t>(j)]->next_state);
  }

  Mat const q_next_online = net.forward(s2);
  Mat const q_next_target = target.forward(s2);

  DuelingNetwork::Cache cache;
  Mat const             q  = net.forward(s, cache);
  Mat                   dq = Mat::Zero(q.rows(), q.cols());
  double                loss = 0.0;
  for (Eigen::Index j = 0; j < B; ++j)
  {
    auto const  &t = *batch[static_cast<std::size_t>(j)];
    double       y = t.reward * ts.reward_scale;
    if (!t.terminal)
    {
      Eigen::Index best = 0;
      q_next_online.col(j).maxCoeff(&best);
      y += ts.discount * q_next_target(best, j);
    }
    auto const a     = static_cast<Eigen::Index>(index_of(t.action));
    double     delta = q(a, j) - y;
    if (ts.clip_td && ts.td_clip > 0.0)
    {
      delta = std::clamp(delta, -ts.td_clip, ts.td_clip);
    }
    loss += delta * delta;
    dq(a, j) = 2.0 * delta / static_cast<double>(B);
  }
  loss /= static_cast<double>(B);
  opt.step(net.params(), net.backward(cache, dq));
  return loss;
}

/// Samples a batch from `buffer` and trains on it; nullopt when the buffer is too small.
inline std::optional<double> train_step(DuelingNetwork &net, DuelingNetwork const &target, Adam &opt,
                                        ReplayBuffer const &buffer, std::size_t batch_size, TrainSettings const &ts,
                                        Rng &rng)
{
  if (buffer.size() < batch_size)
  {
    return std::nullopt;
  }
  std::vector<Transition const *> batch;
  batch.reserve(batch_size);
  for (auto i : buffer.sample_indices(batch_size, rng))
  {
    batch.push_back(&buffer[i]);
  }
  return train_on_batch(net, target, opt, batch, ts);
}

inline void sync_target(DuelingNetwork const &online, DuelingNetwork &target) { target.copy_from(online); }

namespace dqn_detail {

inline void write_network_header(std::ostream &out, std::uint64_t seed, Topology const &t, AgentHyperparams const &hp)
{
  ckpt::put_u64(out, seed);
  ckpt::put_u32(out, static_cast<std::uint32_t>(t.input));
  ckpt::put_u32(out, static_cast<std::uint32_t>(t.trunk.size()));
  for (auto h : t.trunk)
  {
    ckpt::put_u32(out, static_cast<std::uint32_t>(h));
  }
  ckpt::put_u32(out, static_cast<std::uint32_t>(t.head_hidden));
  ckpt::put_u32(out, static_cast<std::uint32_t>(t.actions));
  ckpt::put_f64s(out, {hp.deep_lr, hp.discount, hp.eps_start, hp.eps_min, static_cast<double>(hp.buffer_capacity),
                       static_cast<double>(hp.batch_size), static_cast<double>(hp.target_sync_every),
                       static_cast<double>(hp.marl_sync_every), hp.reward_scale, hp.clip_td ? hp.td_clip : 0.0});
}

inline std::uint64_t read_network_header(std::istream &in, Topology const &expected)
{
  auto const seed = ckpt::get_u64(in);
  Topology   t;
  t.input = ckpt::get_u32(in);
  t.trunk.resize(ckpt::get_u32(in));
  if (t.trunk.size() > 64)
  {
    throw ckpt::FormatError("implausible trunk depth");
  }
  for (auto &h : t.trunk)
  {
    h = ckpt::get_u32(in);
  }
  t.head_hidden = ckpt::get_u32(in);
  t.actions     = ckpt::get_u32(in);
  if (!(t == expected))
  {
    throw ckpt::FormatError("checkpoint topology differs from this agent");
  }
  ckpt::get_f64s(in, 64);
  return seed;
}

inline void read_params(std::istream &in, DuelingNetwork &net)
{
  auto flat = ckpt::get_f64s(in, net.params().size());
  if (flat.size() != net.params().size())
  {
    throw ckpt::FormatError("checkpoint parameter count differs from this agent");
  }
  net.params().assign(flat);
}

}  // namespace dqn_detail

class DrlAgent final : public Agent
{
public:
  DrlAgent(AgentHyperparams hp, std::uint64_t seed)
    : hp_{(hp.validate(), hp)}
    , seed_{seed}
    , rng_{seed}
    , init_rng_{Rng{seed}.fork(0x1417)}
    , online_{topology_of(hp_), init_rng_}
    , target_{online_}
    , opt_{topology_of(hp_), AdamConfig{hp_.deep_lr}}
    , buffer_{hp_.buffer_capacity}
    , schedule_{hp_.eps_start, hp_.eps_min, hp_.total_episodes, hp_.eps_reach_fraction}
    , eps_{hp_.eps_start}
  {}

  std::string_view name() const noexcept override { return "drl"; }

  void   begin_episode(std::uint64_t episode) override { eps_ = schedule_.at(episode); }
  double epsilon() const noexcept override { return eps_; }

  Action act(StateVector const &s) override
  {
    Vec const q = online_.forward_one(encode(s));
    return epsilon_greedy(std::array<double, 3>{q[0], q[1], q[2]}, eps_, rng_);
  }

  void observe(Transition const &t) override
  {
    buffer_.push(t);
    ++steps_;
    if (auto loss = train_step(online_, target_, opt_, buffer_, hp_.batch_size, TrainSettings::from(hp_), rng_))
    {
      last_loss_ = *loss;
    }
    if (steps_ % hp_.target_sync_every == 0)
    {
      sync_target(online_, target_);
    }
  }

  DuelingNetwork const &online() const noexcept { return online_; }
  DuelingNetwork const &target() const noexcept { return target_; }
  double                last_loss() const noexcept { return last_loss_; }

  void save(std::ostream &out) const override
  {
    ckpt::write_header(out, ckpt::Kind::Dqn);
    dqn_detail::write_network_header(out, seed_, online_.topology(), hp_);
    ckpt::put_f64s(out, online_.params().flatten());
    ckpt::put_f64s(out, target_.params().flatten());
  }

  void load(std::istream &in) override
  {
    ckpt::read_header(in, ckpt::Kind::Dqn);
    seed_ = dqn_detail::read_network_header(in, online_.topology());
    dqn_detail::read_params(in, online_);
    dqn_detail::read_params(in, target_);
  }

private:
  AgentHyperparams hp_;
  std::uint64_t    seed_;
  Rng              rng_;
  Rng              init_rng_;
  DuelingNetwork   online_;
  DuelingNetwork   target_;
  Adam             opt_;
  ReplayBuffer     buffer_;
  EpsilonSchedule  schedule_;
  double           eps_;
  std::uint64_t    steps_{0};
  double           last_loss_{0.0};
};

/// Global action from member votes: the unique plurality winner, otherwise Maintain.
inline Action majority_vote(std::span<Action const> votes)
{
  std::array<std::size_t, kActionCount> counts{};
  for (auto v : votes)
  {
    ++counts[index_of(v)];
  }
  std::size_t const top = *std::max_element(counts.begin(), counts.end());
  std::size_t       winners = 0;
  std::size_t       which   = index_of(Action::Maintain);
  for (std::size_t a = 0; a < kActionCount; ++a)
  {
    if (counts[a] == top)
    {
      ++winners;
      which = a;
    }
  }
  return winners == 1 ? action_at(which) : Action::Maintain;
}

/// Samples drawn from each member buffer for one pooled batch: an equal share
/// of `batch` for every nonempty buffer, capped by what the buffer holds.
inline std::vector<std::size_t> pooled_draws(std::span<std::size_t const> sizes, std::size_t batch)
{
  std::size_t const nonempty =
      static_cast<std::size_t>(std::count_if(sizes.begin(), sizes.end(), [](std::size_t n) { return n > 0; }));
  std::vector<std::size_t> out(sizes.size(), 0);
  if (nonempty == 0)
  {
    return out;
  }
  std::size_t const per = std::max<std::size_t>(1, batch / nonempty);
  for (std::size_t i = 0; i < sizes.size(); ++i)
  {
    out[i] = std::min(per, sizes[i]);
  }
  return out;
}

/// Members share one parameter store; each keeps its own replay buffer and random stream.
class MarlAgent final : public Agent
{
public:
  MarlAgent(AgentHyperparams hp, std::uint64_t seed)
    : hp_{(hp.validate(), hp)}
    , seed_{seed}
    , rng_{seed}
    , init_rng_{Rng{seed}.fork(0x1417)}
    , online_{topology_of(hp_), init_rng_}
    , target_{online_}
    , opt_{topology_of(hp_), AdamConfig{hp_.deep_lr}}
    , schedule_{hp_.eps_start, hp_.eps_min, hp_.total_episodes, hp_.eps_reach_fraction}
    , eps_{hp_.eps_start}
  {
    members_.reserve(hp_.marl_agents);
    for (std::size_t i = 0; i < hp_.marl_agents; ++i)
    {
      members_.push_back(Member{rng_.fork(100 + i), ReplayBuffer{hp_.buffer_capacity}});
    }
    votes_.resize(hp_.marl_agents);
  }

  std::string_view name() const noexcept override { return "marl"; }

  void   begin_episode(std::uint64_t episode) override { eps_ = schedule_.at(episode); }
  double epsilon() const noexcept override { return eps_; }

  Action act(StateVector const &s) override
  {
    Vec const                   q = online_.forward_one(encode(s));
    std::array<double, 3> const qa{q[0], q[1], q[2]};
    for (std::size_t i = 0; i < members_.size(); ++i)
    {
      votes_[i] = epsilon_greedy(qa, eps_, members_[i].rng);
    }
    return majority_vote(votes_);
  }

  void observe(Transition const &t) override
  {
    for (auto &m : members_)
    {
      m.buffer.push(t);
    }
    ++steps_;
    if (steps_ % hp_.marl_sync_every == 0)
    {
      if (auto loss = train_pooled())
      {
        last_loss_ = *loss;
      }
    }
    if (steps_ % hp_.target_sync_every == 0)
    {
      sync_target(online_, target_);
    }
  }

  /// One shared update from equal draws out of every nonempty member buffer.
  std::optional<double> train_pooled()
  {
    std::vector<std::size_t> sizes;
    for (auto const &m : members_)
    {
      sizes.push_back(m.buffer.size());
    }
    auto const draws = pooled_draws(sizes, hp_.batch_size);
    std::vector<Transition const *> batch;
    for (std::size_t k = 0; k < members_.size(); ++k)
    {
      auto &m = members_[k];
      for (auto i : m.buffer.sample_indices(draws[k], m.rng))
      {
        batch.push_back(&m.buffer[i]);
      }
    }
    if (batch.empty())
    {
      return std::nullopt;
    }
    ++updates_;
    return train_on_batch(online_, target_, opt_, batch, TrainSettings::from(hp_));
  }

  /// Shared-parameter updates applied so far.
  std::uint64_t updates() const noexcept { return updates_; }

  std::span<Action const> last_votes() const noexcept { return votes_; }
  std::size_t             member_count() const noexcept { return members_.size(); }
  ReplayBuffer const     &buffer(std::size_t i) const { return members_.at(i).buffer; }
  DuelingNetwork const   &online() const noexcept { return online_; }
  double                  last_loss() const noexcept { return last_loss_; }

  /// Q-values as seen by member `i`; every member reads the same store.
  Vec member_q(std::size_t i, StateVector const &s) const
  {
    (void)members_.at(i);
    return online_.forward_one(encode(s));
  }

  void save(std::ostream &out) const override
  {
    ckpt::write_header(out, ckpt::Kind::Pool);
    ckpt::put_u32(out, static_cast<std::uint32_t>(members_.size()));
    dqn_detail::write_network_header(out, seed_, online_.topology(), hp_);
    ckpt::put_f64s(out, online_.params().flatten());
    ckpt::put_f64s(out, target_.params().flatten());
  }

  void load(std::istream &in) override
  {
    ckpt::read_header(in, ckpt::Kind::Pool);
    if (ckpt::get_u32(in) != members_.size())
    {
      throw ckpt::FormatError("checkpoint member count differs from this pool");
    }
    seed_ = dqn_detail::read_network_header(in, online_.topology());
    dqn_detail::read_params(in, online_);
    dqn_detail::read_params(in, target_);
  }

private:
  struct Member
  {
    Rng          rng;
    ReplayBuffer buffer;
  };

  AgentHyperparams    hp_;
  std::uint64_t       seed_;
  Rng                 rng_;
  Rng                 init_rng_;
  DuelingNetwork      online_;
  DuelingNetwork      target_;
  Adam                opt_;
  EpsilonSchedule     schedule_;
  std::vector<Member> members_;
  std::vector<Action> votes_;
  double              eps_;
  std::uint64_t       steps_{0};
  std::uint64_t       updates_{0};
  double              last_loss_{0.0};
};

}  // namespace trustsim
