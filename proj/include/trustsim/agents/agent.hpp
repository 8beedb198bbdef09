#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>

#include "trustsim/state.hpp"

namespace trustsim {

struct Transition
{
  StateVector state;
  Action      action{Action::Maintain};
  double      reward{0.0};
  StateVector next_state;
  bool        terminal{false};
};

/// A delegation controller. The environment calls begin_episode, then act/observe
/// once per step, then end_episode.
class Agent
{
public:
  virtual ~Agent() = default;

  virtual std::string_view name() const noexcept = 0;

  virtual void   begin_episode(std::uint64_t /*episode*/) {}
  virtual Action act(StateVector const &s)        = 0;
  virtual void   observe(Transition const &t)     = 0;
  virtual void   end_episode() {}
  virtual double epsilon() const noexcept         = 0;

  virtual void save(std::ostream &out) const = 0;
  virtual void load(std::istream &in)        = 0;
};

}  // namespace trustsim
