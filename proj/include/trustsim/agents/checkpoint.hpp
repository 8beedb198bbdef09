#pragma once

// Portable checkpoint encoding. Every field is little-endian regardless of host:
//
//   magic    8 bytes  "TRSTCKPT"
//   version  u32      1
//   kind     u32      1 tabular, 2 dueling DQN, 3 shared-parameter pool
//   ...kind-specific header and f64 arrays

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace trustsim::ckpt {

inline constexpr std::array<char, 8> kMagic{'T', 'R', 'S', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t       kVersion = 1;

enum class Kind : std::uint32_t
{
  Tabular = 1,
  Dqn     = 2,
  Pool    = 3,
};

class FormatError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline void put_u64(std::ostream &out, std::uint64_t v)
{
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i)
  {
    b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  out.write(b.data(), 8);
}

inline void put_u32(std::ostream &out, std::uint32_t v)
{
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i)
  {
    b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  out.write(b.data(), 4);
}

inline void put_f64(std::ostream &out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_f64s(std::ostream &out, std::vector<double> const &xs)
{
  put_u64(out, xs.size());
  for (double x : xs)
  {
    put_f64(out, x);
  }
}

inline std::uint64_t get_u64(std::istream &in)
{
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char *>(b.data()), 8))
  {
    throw FormatError("checkpoint truncated");
  }
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i)
  {
    v = (v << 8) | b[static_cast<std::size_t>(i)];
  }
  return v;
}

inline std::uint32_t get_u32(std::istream &in)
{
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char *>(b.data()), 4))
  {
    throw FormatError("checkpoint truncated");
  }
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i)
  {
    v = (v << 8) | b[static_cast<std::size_t>(i)];
  }
  return v;
}

inline double get_f64(std::istream &in) { return std::bit_cast<double>(get_u64(in)); }

inline std::vector<double> get_f64s(std::istream &in, std::uint64_t max_count = (1ULL << 32))
{
  auto const n = get_u64(in);
  if (n > max_count)
  {
    throw FormatError("checkpoint array length implausible");
  }
  std::vector<double> xs(n);
  for (auto &x : xs)
  {
    x = get_f64(in);
  }
  return xs;
}

inline void write_header(std::ostream &out, Kind kind)
{
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(kind));
}

inline void read_header(std::istream &in, Kind expected)
{
  std::array<char, 8> m{};
  if (!in.read(m.data(), m.size()) || m != kMagic)
  {
    throw FormatError("not a checkpoint file");
  }
  if (auto v = get_u32(in); v != kVersion)
  {
    throw FormatError("unsupported checkpoint version " + std::to_string(v));
  }
  if (auto k = get_u32(in); k != static_cast<std::uint32_t>(expected))
  {
    throw FormatError("checkpoint holds a different agent kind");
  }
}

}  // namespace trustsim::ckpt
