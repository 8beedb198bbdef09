#pragma once

// Seedable random source shared by every simulation component.
//
// All stochastic operations take an explicit Rng& so that a run is fully
// determined by its seed. Independent streams are derived with fork(), which
// keeps e.g. agent exploration from perturbing the environment's draws.

#include <cstdint>
#include <random>

namespace trustsim {

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng
{
public:
  explicit Rng(std::uint64_t seed = 42) : seed_{seed}, engine_{splitmix64(seed)} {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Deterministic child stream; the same (seed, stream_id) always yields the same child.
  Rng fork(std::uint64_t stream_id) const
  {
    return Rng{splitmix64(seed_ ^ splitmix64(stream_id + 0x5851f42d4c957f2dULL))};
  }

  double uniform() { return std::uniform_real_distribution<double>{0.0, 1.0}(engine_); }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>{lo, hi}(engine_); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>{0, n - 1}(engine_); }

  bool bernoulli(double p) { return uniform() < p; }

  double normal(double mean, double sd) { return std::normal_distribution<double>{mean, sd}(engine_); }

  double gamma(double shape) { return std::gamma_distribution<double>{shape, 1.0}(engine_); }

  /// Beta(a, b) via the ratio of two unit-scale gamma draws.
  double beta(double a, double b)
  {
    double const x = gamma(a);
    double const y = gamma(b);
    double const s = x + y;
    // Both draws can underflow to zero for tiny shapes; fall back to the mean.
    if (!(s > 0.0))
    {
      return a / (a + b);
    }
    return x / s;
  }

  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64 &engine() noexcept { return engine_; }

private:
  std::uint64_t   seed_;
  std::mt19937_64 engine_;
};

}  // namespace trustsim
