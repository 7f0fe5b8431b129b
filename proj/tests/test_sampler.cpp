#include <doctest.h>

#include <cstdint>
#include <vector>

#include "nqsite/hilbert.hpp"
#include "nqsite/lattice.hpp"
#include "nqsite/nqs_model.hpp"
#include "nqsite/sampler.hpp"

using namespace nqsite;

namespace {

Architecture tiny_arch() {
  Architecture a;
  a.d_lat = 4;
  a.d_p = 2;
  a.d_enc = 1;
  a.width = 1;
  a.depth = 1;
  return a;
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("init_ensemble assigns one stream per walker, reproducibly") {
  WalkerEnsemble a = init_ensemble(8, 16, 8, 99);
  WalkerEnsemble b = init_ensemble(8, 16, 8, 99);
  WalkerEnsemble c = init_ensemble(8, 16, 8, 100);
  REQUIRE(a.walkers.size() == 8);
  bool all_same = true;
  for (std::size_t w = 0; w < 8; ++w) {
    CHECK(a.rngs[w].stream() == w);
    CHECK(a.walkers[w].n_sites == 16);
    CHECK(a.walkers[w].n_up() == 8);
    CHECK(a.walkers[w] == b.walkers[w]);
    all_same = all_same && a.walkers[w] == c.walkers[w];
  }
  CHECK_FALSE(all_same);  // a different seed moves at least one walker
  CHECK(a.n_proposed == 0);
  CHECK_THROWS(init_ensemble(0, 16, 8, 1));
}

TEST_CASE("sweeps preserve magnetization and count proposals") {
  const Lattice lat = build_lattice(4);
  NqsNetwork net(tiny_arch());
  net.init_params(3);
  net.params() *= 3.0;
  WalkerEnsemble ens = init_ensemble(16, 16, 8, 5);
  metropolis_sweeps(net, lat, ens, 25);
  CHECK(ens.n_proposed == 16 * 25);
  CHECK(ens.n_accepted <= ens.n_proposed);
  for (const SpinConfig& w : ens.walkers) CHECK(w.n_up() == 8);

  SUBCASE("sample_batch returns the walker states after n_skip sweeps") {
    const auto batch = sample_batch(net, lat, ens, 3);
    CHECK(ens.n_proposed == 16 * 28);
    REQUIRE(batch.size() == ens.walkers.size());
    for (std::size_t w = 0; w < batch.size(); ++w)
      CHECK(batch[w] == ens.walkers[w]);
  }

  SUBCASE("counter reset") {
    ens.reset_counters();
    CHECK(ens.n_proposed == 0);
    CHECK(ens.acceptance_rate() == 0.0);
  }
}

TEST_CASE("identical seeds reproduce identical chains") {
  const Lattice lat = build_lattice(4);
  NqsNetwork net(tiny_arch());
  net.init_params(17);
  WalkerEnsemble a = init_ensemble(4, 16, 8, 21);
  WalkerEnsemble b = init_ensemble(4, 16, 8, 21);
  metropolis_sweeps(net, lat, a, 50);
  metropolis_sweeps(net, lat, b, 30);
  metropolis_sweeps(net, lat, b, 20);  // split runs must land identically
  for (std::size_t w = 0; w < 4; ++w) {
    CHECK(a.walkers[w] == b.walkers[w]);
    CHECK(a.rngs[w].position() == b.rngs[w].position());
  }
}

TEST_CASE("flat wavefunction: every proposal accepted, uniform stationary law") {
  // All-zero parameters make |psi|^2 constant, so the symmetric bond-pick
  // kernel must accept everything and its stationary distribution is
  // uniform on the sector.
  const Lattice lat = build_lattice(4);
  NqsNetwork net(tiny_arch());  // constructor leaves parameters at zero
  const SectorIndex sec = enumerate_sector(16, 8);

  WalkerEnsemble ens = init_ensemble(256, 16, 8, 7);
  warmup(net, lat, ens, 400);
  ens.reset_counters();

  std::vector<std::uint64_t> counts(sec.dim(), 0);
  const int batches = 500;
  for (int b = 0; b < batches; ++b)
    for (const SpinConfig& s : sample_batch(net, lat, ens, 128))
      ++counts[sec.ordinal(s)];
  CHECK(ens.acceptance_rate() == 1.0);

  const double n = 256.0 * batches;
  const double expected = n / static_cast<double>(sec.dim());
  double chi2 = 0;
  for (const std::uint64_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi2 += d * d / expected;
  }
  // 0.99 quantile of chi-squared with 12869 degrees of freedom.
  CHECK(chi2 < 13245.156211371279);
}

}  // TEST_SUITE
