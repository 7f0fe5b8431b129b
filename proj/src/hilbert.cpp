#include "nqsite/hilbert.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>

namespace nqsite {

SpinConfig SectorIndex::config(std::size_t ordinal) const {
  if (ordinal >= states_.size())
    throw std::out_of_range("sector ordinal " + std::to_string(ordinal) +
                            " out of range");
  return SpinConfig{states_[ordinal], n_sites_};
}

std::size_t SectorIndex::ordinal(SpinConfig c) const {
  auto it = std::lower_bound(states_.begin(), states_.end(), c.bits);
  if (it == states_.end() || *it != c.bits)
    throw std::invalid_argument("configuration is not in the sector");
  return (std::size_t)(it - states_.begin());
}

SectorIndex enumerate_sector(int n_sites, int n_up) {
  if (n_sites < 1 || n_sites > 32)
    throw std::length_error("sector enumeration supports 1..32 sites, got " +
                            std::to_string(n_sites));
  if (n_up < 0 || n_up > n_sites)
    throw std::invalid_argument("n_up must be in [0, n_sites]");

  std::vector<std::uint64_t> states;
  // Gosper's hack: step through bit patterns of fixed popcount in
  // ascending order.
  if (n_up == 0) {
    states.push_back(0);
  } else {
    std::uint64_t v = (1ull << n_up) - 1;
    const std::uint64_t limit = n_sites == 64 ? ~0ull : (1ull << n_sites);
    while (v < limit) {
      states.push_back(v);
      const std::uint64_t t = v | (v - 1);
      v = (t + 1) | (((~t & -(~t)) - 1) >> (__builtin_ctzll(v) + 1));
    }
  }
  return SectorIndex(n_sites, n_up, std::move(states));
}

SpinConfig random_config(int n_sites, int n_up, CounterRng& rng) {
  if (n_sites < 1 || n_sites > 64 || n_up < 0 || n_up > n_sites)
    throw std::invalid_argument("bad (n_sites, n_up)");
  std::array<int, 64> sites;
  for (int i = 0; i < n_sites; ++i) sites[i] = i;
  std::uint64_t bits = 0;
  for (int i = 0; i < n_up; ++i) {
    const int j = i + (int)rng.next_below((std::uint64_t)(n_sites - i));
    std::swap(sites[i], sites[j]);
    bits |= 1ull << sites[i];
  }
  return SpinConfig{bits, n_sites};
}

}  // namespace nqsite
