#include "nqsite/lattice.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace nqsite {

namespace {

Bond make_bond(int i, int j) {
  return i < j ? Bond{i, j} : Bond{j, i};
}

void sort_bonds(std::vector<Bond>& bonds) {
  std::sort(bonds.begin(), bonds.end(), [](const Bond& l, const Bond& r) {
    return l.a != r.a ? l.a < r.a : l.b < r.b;
  });
}

}  // namespace

Lattice build_lattice(int d_lat) {
  if (d_lat < 4 || d_lat % 2 != 0)
    throw std::invalid_argument("d_lat must be even and >= 4, got " +
                                std::to_string(d_lat));

  Lattice lat;
  lat.d_lat = d_lat;
  lat.n_sites = d_lat * d_lat;

  // Walk every site and emit its +x/+y neighbors (nearest) and the two
  // right-going diagonals (next-nearest); with periodic wrapping this
  // produces each bond exactly once for d_lat >= 4.
  for (int y = 0; y < d_lat; ++y) {
    for (int x = 0; x < d_lat; ++x) {
      const int i = lat.site_index(x, y);
      lat.nn_bonds.push_back(make_bond(i, lat.site_index(x + 1, y)));
      lat.nn_bonds.push_back(make_bond(i, lat.site_index(x, y + 1)));
      lat.nnn_bonds.push_back(make_bond(i, lat.site_index(x + 1, y + 1)));
      lat.nnn_bonds.push_back(make_bond(i, lat.site_index(x + 1, y - 1)));
    }
  }
  sort_bonds(lat.nn_bonds);
  sort_bonds(lat.nnn_bonds);
  return lat;
}

std::vector<int> bond_partners(const std::vector<Bond>& bonds, int site) {
  std::vector<int> out;
  for (const Bond& b : bonds) {
    if (b.a == site) out.push_back(b.b);
    if (b.b == site) out.push_back(b.a);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace nqsite
