#include "nqsite/hamiltonian.hpp"

#include <algorithm>
#include <stdexcept>

namespace nqsite {

namespace {

void add_bonds(const std::vector<Bond>& bonds, double J, SpinConfig s,
               ConnectedSet& out) {
  if (J == 0.0) return;
  for (const Bond& b : bonds) {
    const bool ua = s.up(b.a);
    const bool ub = s.up(b.b);
    if (ua == ub) {
      out.diagonal += 0.25 * J;
    } else {
      out.diagonal -= 0.25 * J;
      const std::uint64_t flipped =
          s.bits ^ ((1ull << b.a) | (1ull << b.b));
      out.off_diag.push_back(
          {SpinConfig{flipped, s.n_sites}, 0.5 * J});
    }
  }
}

}  // namespace

ConnectedSet connected(const Lattice& lat, const Couplings& cpl,
                       SpinConfig s) {
  ConnectedSet out;
  add_bonds(lat.nn_bonds, cpl.j1, s, out);
  add_bonds(lat.nnn_bonds, cpl.j2, s, out);

  // Sort by target pattern and merge any duplicate targets by summing
  // their amplitudes.
  std::sort(out.off_diag.begin(), out.off_diag.end(),
            [](const OffDiagEntry& l, const OffDiagEntry& r) {
              return l.config.bits < r.config.bits;
            });
  std::size_t w = 0;
  for (std::size_t i = 0; i < out.off_diag.size(); ++i) {
    if (w > 0 && out.off_diag[w - 1].config.bits == out.off_diag[i].config.bits)
      out.off_diag[w - 1].amplitude += out.off_diag[i].amplitude;
    else
      out.off_diag[w++] = out.off_diag[i];
  }
  out.off_diag.resize(w);
  return out;
}

namespace {

template <class Vec>
void apply_impl(const Lattice& lat, const Couplings& cpl,
                const SectorIndex& sector, const Vec& x, Vec& y) {
  const std::size_t dim = sector.dim();
  if ((std::size_t)x.size() != dim)
    throw std::invalid_argument("vector length does not match sector size");
  y.resize((Eigen::Index)dim);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < (std::ptrdiff_t)dim; ++k) {
    const ConnectedSet row = connected(lat, cpl, sector.config((std::size_t)k));
    auto acc = row.diagonal * x[k];
    for (const OffDiagEntry& e : row.off_diag)
      acc += e.amplitude * x[(Eigen::Index)sector.ordinal(e.config)];
    y[k] = acc;
  }
}

}  // namespace

void apply_hamiltonian(const Lattice& lat, const Couplings& cpl,
                       const SectorIndex& sector, const Eigen::VectorXd& x,
                       Eigen::VectorXd& y) {
  apply_impl(lat, cpl, sector, x, y);
}

void apply_hamiltonian(const Lattice& lat, const Couplings& cpl,
                       const SectorIndex& sector, const Eigen::VectorXcd& x,
                       Eigen::VectorXcd& y) {
  apply_impl(lat, cpl, sector, x, y);
}

Eigen::SparseMatrix<double> sector_matrix(const Lattice& lat,
                                          const Couplings& cpl,
                                          const SectorIndex& sector) {
  const std::size_t dim = sector.dim();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(dim * (std::size_t)(4 * lat.n_sites + 1) / 2);
  for (std::size_t k = 0; k < dim; ++k) {
    const ConnectedSet row = connected(lat, cpl, sector.config(k));
    trips.emplace_back((int)k, (int)k, row.diagonal);
    for (const OffDiagEntry& e : row.off_diag)
      trips.emplace_back((int)k, (int)sector.ordinal(e.config), e.amplitude);
  }
  Eigen::SparseMatrix<double> H((Eigen::Index)dim, (Eigen::Index)dim);
  H.setFromTriplets(trips.begin(), trips.end());
  return H;
}

Eigen::MatrixXd dense_sector_matrix(const Lattice& lat, const Couplings& cpl,
                                    const SectorIndex& sector) {
  const std::size_t dim = sector.dim();
  if (dim > 4096)
    throw std::length_error("dense sector matrix limited to dimension 4096");
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero((Eigen::Index)dim,
                                            (Eigen::Index)dim);
  for (std::size_t k = 0; k < dim; ++k) {
    const ConnectedSet row = connected(lat, cpl, sector.config(k));
    H((Eigen::Index)k, (Eigen::Index)k) = row.diagonal;
    for (const OffDiagEntry& e : row.off_diag)
      H((Eigen::Index)k, (Eigen::Index)sector.ordinal(e.config)) = e.amplitude;
  }
  return H;
}

}  // namespace nqsite
