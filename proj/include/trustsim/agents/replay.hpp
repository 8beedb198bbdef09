#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "trustsim/agents/agent.hpp"
#include "trustsim/random.hpp"

namespace trustsim {

/// Fixed-capacity ring of transitions; the oldest entry is overwritten when full.
class ReplayBuffer
{
public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_{capacity}
  {
    if (capacity == 0)
    {
      throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    }
    data_.reserve(std::min<std::size_t>(capacity, 1024));
  }

  void push(Transition t)
  {
    if (data_.size() < capacity_)
    {
      data_.push_back(std::move(t));
    }
    else
    {
      data_[head_] = std::move(t);
    }
    head_ = (head_ + 1) % capacity_;
  }

  std::size_t size() const noexcept { return data_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool        empty() const noexcept { return data_.empty(); }

  Transition const &operator[](std::size_t i) const { return data_.at(i); }

  /// `n` distinct indices drawn uniformly (Floyd's algorithm).
  std::vector<std::size_t> sample_indices(std::size_t n, Rng &rng) const
  {
    if (n > data_.size())
    {
      throw std::invalid_argument("ReplayBuffer: sample larger than contents");
    }
    std::vector<std::size_t> picked;
    picked.reserve(n);
    std::size_t const N = data_.size();
    for (std::size_t j = N - n; j < N; ++j)
    {
      std::size_t const t = rng.index(j + 1);
      if (std::find(picked.begin(), picked.end(), t) == picked.end())
      {
        picked.push_back(t);
      }
      else
      {
        picked.push_back(j);
      }
    }
    return picked;
  }

  void clear()
  {
    data_.clear();
    head_ = 0;
  }

private:
  std::size_t             capacity_;
  std::size_t             head_{0};
  std::vector<Transition> data_;
};

}  // namespace trustsim
