#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "nqsite/hamiltonian.hpp"

namespace nqsite {

struct EdResult {
  double e0 = 0.0;
  Eigen::VectorXd ground;  // normalized; largest-magnitude entry positive
  double residual = 0.0;   // ||H v - e0 v||_2
  int iterations = 0;
};

// Ground state by Lanczos on the matrix-free sector Hamiltonian.  Full
// reorthogonalization (two passes) keeps the basis orthonormal, the start
// vector comes from a dedicated stream of `seed`, and convergence is
// certified against the true residual: ||H v - e0 v|| <= tol * max(1,|e0|).
// Throws std::runtime_error if the residual target is not reached.
EdResult ground_state(const Lattice& lat, const Couplings& cpl,
                      const SectorIndex& sector, double tol = 1e-10,
                      int max_iter = 600, std::uint64_t seed = 1);

// Dense cross-check path for small sectors.
EdResult dense_ground_state(const Lattice& lat, const Couplings& cpl,
                            const SectorIndex& sector);

}  // namespace nqsite
