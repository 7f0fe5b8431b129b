#include <doctest.h>

#include <algorithm>
#include <set>
#include <stdexcept>
#include <vector>

#include "nqsite/lattice.hpp"

using namespace nqsite;

namespace {

std::vector<int> sorted_partners(const std::vector<Bond>& bonds, int site) {
  std::vector<int> p = bond_partners(bonds, site);
  std::sort(p.begin(), p.end());
  return p;
}

}  // namespace

TEST_SUITE("lattice") {

TEST_CASE("4x4 lattice has 16 sites and 2N bonds of each kind") {
  const Lattice lat = build_lattice(4);
  CHECK(lat.d_lat == 4);
  CHECK(lat.n_sites == 16);
  CHECK(lat.nn_bonds.size() == 32);
  CHECK(lat.nnn_bonds.size() == 32);
}

TEST_CASE("6x6 lattice has 36 sites and 72 bonds of each kind") {
  const Lattice lat = build_lattice(6);
  CHECK(lat.n_sites == 36);
  CHECK(lat.nn_bonds.size() == 72);
  CHECK(lat.nnn_bonds.size() == 72);
}

TEST_CASE("corner site neighbors on 4x4 with periodic wrapping") {
  const Lattice lat = build_lattice(4);
  // Site 0 is (0,0); axis neighbors are (1,0), (3,0), (0,1), (0,3).
  CHECK(sorted_partners(lat.nn_bonds, 0) == std::vector<int>{1, 3, 4, 12});
  // Diagonal neighbors are (1,1), (3,1), (1,3), (3,3).
  CHECK(sorted_partners(lat.nnn_bonds, 0) == std::vector<int>{5, 7, 13, 15});
}

TEST_CASE("every site touches exactly four bonds of each kind") {
  const Lattice lat = build_lattice(6);
  for (int s = 0; s < lat.n_sites; ++s) {
    CHECK(bond_partners(lat.nn_bonds, s).size() == 4);
    CHECK(bond_partners(lat.nnn_bonds, s).size() == 4);
  }
}

TEST_CASE("bonds are stored once, normalized a < b, with no duplicates") {
  const Lattice lat = build_lattice(4);
  for (const auto* list : {&lat.nn_bonds, &lat.nnn_bonds}) {
    std::set<std::pair<int, int>> seen;
    for (const Bond& b : *list) {
      CHECK(b.a < b.b);
      CHECK(b.a >= 0);
      CHECK(b.b < lat.n_sites);
      CHECK(seen.insert({b.a, b.b}).second);
    }
  }
}

TEST_CASE("nn and nnn bond sets are disjoint") {
  const Lattice lat = build_lattice(4);
  std::set<std::pair<int, int>> nn;
  for (const Bond& b : lat.nn_bonds) nn.insert({b.a, b.b});
  for (const Bond& b : lat.nnn_bonds) CHECK(nn.count({b.a, b.b}) == 0);
}

TEST_CASE("site_index wraps periodically and site_xy inverts it") {
  const Lattice lat = build_lattice(4);
  CHECK(lat.site_index(0, 0) == 0);
  CHECK(lat.site_index(-1, 0) == 3);
  CHECK(lat.site_index(4, 4) == 0);
  CHECK(lat.site_index(1, 2) == 9);
  for (int i = 0; i < lat.n_sites; ++i) {
    const auto [x, y] = lat.site_xy(i);
    CHECK(lat.site_index(x, y) == i);
  }
}

TEST_CASE("odd or tiny side lengths are rejected") {
  CHECK_THROWS_AS(build_lattice(5), std::invalid_argument);
  CHECK_THROWS_AS(build_lattice(3), std::invalid_argument);
  CHECK_THROWS_AS(build_lattice(2), std::invalid_argument);
  CHECK_THROWS_AS(build_lattice(0), std::invalid_argument);
  CHECK_THROWS_AS(build_lattice(-4), std::invalid_argument);
}

}  // TEST_SUITE
