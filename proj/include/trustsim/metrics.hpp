#pragma once

// Detection metrics. Positive class = malicious; a node is flagged when its
// trust falls strictly below the threshold.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "trustsim/consensus.hpp"

namespace trustsim {

struct ConfusionMatrix
{
  std::uint32_t tp{0};
  std::uint32_t fp{0};
  std::uint32_t fn{0};
  std::uint32_t tn{0};

  std::uint32_t total() const noexcept { return tp + fp + fn + tn; }

  friend bool operator==(ConfusionMatrix const &, ConfusionMatrix const &) = default;
};

inline ConfusionMatrix classify(std::span<double const> trusts, std::span<NodeRole const> roles, double theta)
{
  if (trusts.size() != roles.size())
  {
    throw std::invalid_argument("classify: trusts and roles differ in length");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < trusts.size(); ++i)
  {
    bool const flagged = trusts[i] < theta;
    if (roles[i].malicious())
    {
      (flagged ? cm.tp : cm.fn) += 1;
    }
    else
    {
      (flagged ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

inline double precision(ConfusionMatrix const &cm) noexcept
{
  auto const d = cm.tp + cm.fp;
  return d == 0 ? 0.0 : static_cast<double>(cm.tp) / static_cast<double>(d);
}

inline double recall(ConfusionMatrix const &cm) noexcept
{
  auto const d = cm.tp + cm.fn;
  return d == 0 ? 0.0 : static_cast<double>(cm.tp) / static_cast<double>(d);
}

inline double f1(ConfusionMatrix const &cm) noexcept
{
  double const p = precision(cm);
  double const r = recall(cm);
  return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

/// One row of episodes.csv.
struct EpisodeRecord
{
  std::uint64_t   episode{0};
  double          cumulative_reward{0.0};
  ConfusionMatrix confusion{};
  double          f1{0.0};
  double          precision{0.0};
  double          recall{0.0};
  std::uint64_t   throughput{0};
  std::uint64_t   chain_length{0};
  double          mean_kappa{0.0};
  double          trust_separation{0.0};
  double          delegation_ratio{0.0};
};

struct MetricSummary
{
  double mean{0.0};
  double sd{0.0};
};

struct TailSummary
{
  std::size_t   count{0};
  MetricSummary cumulative_reward;
  MetricSummary f1;
  MetricSummary precision;
  MetricSummary recall;
  MetricSummary throughput;
  MetricSummary chain_length;
  MetricSummary mean_kappa;
  MetricSummary trust_separation;
  MetricSummary delegation_ratio;
};

namespace detail {

template <typename Get>
MetricSummary summarize(std::span<EpisodeRecord const> rows, Get get)
{
  double sum = 0.0;
  for (auto const &r : rows)
  {
    sum += get(r);
  }
  double const mean = sum / static_cast<double>(rows.size());
  double       ss   = 0.0;
  for (auto const &r : rows)
  {
    double const d = get(r) - mean;
    ss += d * d;
  }
  // Population standard deviation over the tail window.
  return {mean, std::sqrt(ss / static_cast<double>(rows.size()))};
}

}  // namespace detail

inline TailSummary aggregate_tail(std::span<EpisodeRecord const> records, std::size_t tail)
{
  if (records.empty())
  {
    throw std::invalid_argument("aggregate_tail: no records");
  }
  if (tail == 0 || tail > records.size())
  {
    throw std::invalid_argument("aggregate_tail: tail must be in [1, records]");
  }
  auto const  rows = records.subspan(records.size() - tail);
  TailSummary s;
  s.count             = tail;
  s.cumulative_reward = detail::summarize(rows, [](auto const &r) { return r.cumulative_reward; });
  s.f1                = detail::summarize(rows, [](auto const &r) { return r.f1; });
  s.precision         = detail::summarize(rows, [](auto const &r) { return r.precision; });
  s.recall            = detail::summarize(rows, [](auto const &r) { return r.recall; });
  s.throughput        = detail::summarize(rows, [](auto const &r) { return static_cast<double>(r.throughput); });
  s.chain_length      = detail::summarize(rows, [](auto const &r) { return static_cast<double>(r.chain_length); });
  s.mean_kappa        = detail::summarize(rows, [](auto const &r) { return r.mean_kappa; });
  s.trust_separation  = detail::summarize(rows, [](auto const &r) { return r.trust_separation; });
  s.delegation_ratio  = detail::summarize(rows, [](auto const &r) { return r.delegation_ratio; });
  return s;
}

}  // namespace trustsim
