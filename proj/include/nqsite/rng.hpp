#pragma once

#include <cstdint>

namespace nqsite {

// Counter-based RNG (Philox2x64, 10 rounds).  Each generator owns an
// independent stream selected by (key, stream); the position is a plain
// counter, so state serializes to a single integer and any number of
// streams can be split off without coordination.
class CounterRng {
 public:
  CounterRng() = default;
  CounterRng(std::uint64_t key, std::uint64_t stream)
      : key_(key), stream_(stream) {}

  std::uint64_t next_u64() {
    std::uint64_t c0 = stream_;
    std::uint64_t c1 = pos_++;
    std::uint64_t k = key_;
    for (int round = 0; round < 10; ++round) {
      const unsigned __int128 prod = (unsigned __int128)kMul * c0;
      const std::uint64_t hi = (std::uint64_t)(prod >> 64);
      const std::uint64_t lo = (std::uint64_t)prod;
      c0 = hi ^ k ^ c1;
      c1 = lo;
      k += kWeyl;
    }
    return c0 ^ c1;
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_double() { return (double)(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n) via widening multiply.
  std::uint64_t next_below(std::uint64_t n) {
    return (std::uint64_t)(((unsigned __int128)next_u64() * n) >> 64);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t position() const { return pos_; }
  void set_position(std::uint64_t pos) { pos_ = pos; }

 private:
  static constexpr std::uint64_t kMul = 0xD2B74407B1CE6E93ull;
  static constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ull;

  std::uint64_t key_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t pos_ = 0;
};

// Stream namespaces.  Walker i uses stream i; everything else gets a
// disjoint range so independent consumers never collide.
constexpr std::uint64_t kStreamParamInit = 0x8000000000000000ull;
constexpr std::uint64_t kStreamLanczos = 0x8000000000000001ull;

}  // namespace nqsite
