#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <complex>
#include <vector>

#include "nqsite/hilbert.hpp"
#include "nqsite/lattice.hpp"

namespace nqsite {

// H = j1 * sum_<ij> S_i.S_j + j2 * sum_<<ij>> S_i.S_j on the periodic
// square lattice, in the S^z product basis.  Per bond: aligned spins give
// +J/4 on the diagonal; anti-aligned give -J/4 plus an exchange matrix
// element J/2 to the pair-swapped configuration.
struct Couplings {
  double j1 = 1.0;
  double j2 = 0.0;
};

struct OffDiagEntry {
  SpinConfig config;
  double amplitude = 0.0;
};

// The row of H attached to one basis state: <s|H|s> plus every
// <s|H|s'> != 0 with s' != s, sorted by the bit pattern of s'.
struct ConnectedSet {
  double diagonal = 0.0;
  std::vector<OffDiagEntry> off_diag;
};

ConnectedSet connected(const Lattice& lat, const Couplings& cpl, SpinConfig s);

// y = H x on a sector, matrix-free.  Row order follows the sector
// enumeration and each row accumulates in bond order, so the result is
// independent of threading.
void apply_hamiltonian(const Lattice& lat, const Couplings& cpl,
                       const SectorIndex& sector, const Eigen::VectorXd& x,
                       Eigen::VectorXd& y);
void apply_hamiltonian(const Lattice& lat, const Couplings& cpl,
                       const SectorIndex& sector, const Eigen::VectorXcd& x,
                       Eigen::VectorXcd& y);

// Explicit sector matrices, used by cross-check oracles and the dense
// eigensolver path.
Eigen::SparseMatrix<double> sector_matrix(const Lattice& lat,
                                          const Couplings& cpl,
                                          const SectorIndex& sector);
Eigen::MatrixXd dense_sector_matrix(const Lattice& lat, const Couplings& cpl,
                                    const SectorIndex& sector);

}  // namespace nqsite
