#include "nqsite/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace nqsite {

WalkerEnsemble init_ensemble(int n_walkers, int n_sites, int n_up,
                             std::uint64_t seed) {
  if (n_walkers < 1) throw std::invalid_argument("need at least one walker");
  WalkerEnsemble ens;
  ens.walkers.resize((std::size_t)n_walkers);
  ens.rngs.reserve((std::size_t)n_walkers);
  for (int w = 0; w < n_walkers; ++w) {
    ens.rngs.emplace_back(seed, (std::uint64_t)w);
    ens.walkers[(std::size_t)w] = random_config(n_sites, n_up, ens.rngs.back());
  }
  return ens;
}

void metropolis_sweeps(const PsiFunction& psi, const Lattice& lat,
                       WalkerEnsemble& ens, int n_sweeps) {
  if (n_sweeps <= 0) return;
  const std::size_t nw = ens.walkers.size();
  const std::uint64_t n_bonds = (std::uint64_t)lat.nn_bonds.size();

  std::vector<PsiValue> cur(nw), prop(nw);
  std::vector<SpinConfig> proposals(nw);
  std::vector<std::uint8_t> exchanged(nw);

  // log rho of the current states; kept up to date across sweeps
  psi.psi_batch(ens.walkers, cur);

  for (int sweep = 0; sweep < n_sweeps; ++sweep) {
    for (std::size_t w = 0; w < nw; ++w) {
      const Bond& b = lat.nn_bonds[ens.rngs[w].next_below(n_bonds)];
      const SpinConfig s = ens.walkers[w];
      if (s.up(b.a) != s.up(b.b)) {
        proposals[w] =
            SpinConfig{s.bits ^ ((1ull << b.a) | (1ull << b.b)), s.n_sites};
        exchanged[w] = 1;
      } else {
        proposals[w] = s;  // aligned pair: exchange is the identity
        exchanged[w] = 0;
      }
    }
    psi.psi_batch(proposals, prop);
    for (std::size_t w = 0; w < nw; ++w) {
      ++ens.n_proposed;
      if (!exchanged[w]) {
        ++ens.n_accepted;  // unchanged state, ratio is exactly 1
        continue;
      }
      const double u = ens.rngs[w].next_double();
      if (u <= std::exp(2.0 * (prop[w].log_rho - cur[w].log_rho))) {
        ens.walkers[w] = proposals[w];
        cur[w] = prop[w];
        ++ens.n_accepted;
      }
    }
  }
}

void warmup(const PsiFunction& psi, const Lattice& lat, WalkerEnsemble& ens,
            int n_warmup) {
  metropolis_sweeps(psi, lat, ens, n_warmup);
}

std::vector<SpinConfig> sample_batch(const PsiFunction& psi,
                                     const Lattice& lat, WalkerEnsemble& ens,
                                     int n_skip) {
  metropolis_sweeps(psi, lat, ens, n_skip);
  return ens.walkers;
}

}  // namespace nqsite
