#pragma once

#include <utility>
#include <vector>

namespace nqsite {

// Undirected pair of site indices, stored with a < b.
struct Bond {
  int a = 0;
  int b = 0;
  friend bool operator==(const Bond&, const Bond&) = default;
};

// Periodic d_lat x d_lat square lattice.  Sites are indexed row-major:
// index = y * d_lat + x.  nn_bonds holds the 2*N nearest-neighbor pairs
// (axis displacements), nnn_bonds the 2*N diagonal pairs; each bond is
// stored exactly once.
struct Lattice {
  int d_lat = 0;
  int n_sites = 0;
  std::vector<Bond> nn_bonds;
  std::vector<Bond> nnn_bonds;

  int site_index(int x, int y) const {
    const int d = d_lat;
    x = ((x % d) + d) % d;
    y = ((y % d) + d) % d;
    return y * d + x;
  }
  std::pair<int, int> site_xy(int i) const { return {i % d_lat, i / d_lat}; }
};

// Builds the lattice; d_lat must be even and >= 4 so that 2x2 patches tile
// the grid and nearest/next-nearest bonds are distinct.
Lattice build_lattice(int d_lat);

// All sites bonded to `site` within the given bond list.
std::vector<int> bond_partners(const std::vector<Bond>& bonds, int site);

}  // namespace nqsite
