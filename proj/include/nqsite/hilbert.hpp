#pragma once

#include <cstdint>
#include <vector>

#include "nqsite/rng.hpp"

namespace nqsite {

// One basis state of N spin-1/2 sites.  Bit j set means site j is up.
struct SpinConfig {
  std::uint64_t bits = 0;
  int n_sites = 0;

  bool up(int site) const { return (bits >> site) & 1u; }
  int n_up() const { return __builtin_popcountll(bits); }
  friend bool operator==(const SpinConfig&, const SpinConfig&) = default;
};

// Fixed-magnetization sector: every configuration of n_sites spins with
// exactly n_up spins up, enumerated in ascending bit-pattern order.
class SectorIndex {
 public:
  SectorIndex(int n_sites, int n_up, std::vector<std::uint64_t> states)
      : n_sites_(n_sites), n_up_(n_up), states_(std::move(states)) {}

  int n_sites() const { return n_sites_; }
  int n_up() const { return n_up_; }
  std::size_t dim() const { return states_.size(); }
  const std::vector<std::uint64_t>& states() const { return states_; }

  SpinConfig config(std::size_t ordinal) const;
  // Position of `c` in the enumeration; throws if it is outside the sector.
  std::size_t ordinal(SpinConfig c) const;

 private:
  int n_sites_;
  int n_up_;
  std::vector<std::uint64_t> states_;
};

// Enumerates the (n_sites choose n_up) sector.  n_sites is capped at 32 so
// the enumeration cannot silently explode.
SectorIndex enumerate_sector(int n_sites, int n_up);

// Uniform draw from the sector via a partial Fisher-Yates shuffle of the
// site indices.
SpinConfig random_config(int n_sites, int n_up, CounterRng& rng);

}  // namespace nqsite
