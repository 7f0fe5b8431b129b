#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nqsite/lattice.hpp"
#include "nqsite/rng.hpp"
#include "nqsite/wavefunction.hpp"

namespace nqsite {

// Parallel Metropolis walkers in the fixed-magnetization sector.  Each
// walker owns one counter-based RNG stream (stream id = walker index), so
// chains are independent and the whole ensemble is reproducible and
// serializable regardless of how walkers are scheduled onto threads.
struct WalkerEnsemble {
  std::vector<SpinConfig> walkers;
  std::vector<CounterRng> rngs;
  std::uint64_t n_proposed = 0;
  std::uint64_t n_accepted = 0;

  double acceptance_rate() const {
    return n_proposed == 0 ? 0.0 : (double)n_accepted / (double)n_proposed;
  }
  void reset_counters() { n_proposed = n_accepted = 0; }
};

// Walkers start from uniform random sector configurations drawn from their
// own streams.
WalkerEnsemble init_ensemble(int n_walkers, int n_sites, int n_up,
                             std::uint64_t seed);

// One proposal per walker per sweep: pick a nearest-neighbor bond uniformly
// at random; if its spins are anti-aligned, propose the exchanged pair and
// accept with probability min(1, |psi(s')|^2 / |psi(s)|^2); if aligned, the
// proposal is the unchanged state and counts as accepted.
void metropolis_sweeps(const PsiFunction& psi, const Lattice& lat,
                       WalkerEnsemble& ens, int n_sweeps);

// n_warmup sweeps, run once at the start of every epoch.
void warmup(const PsiFunction& psi, const Lattice& lat, WalkerEnsemble& ens,
            int n_warmup);

// Advance n_skip sweeps and return a copy of the walker states.
std::vector<SpinConfig> sample_batch(const PsiFunction& psi,
                                     const Lattice& lat, WalkerEnsemble& ens,
                                     int n_skip);

}  // namespace nqsite
