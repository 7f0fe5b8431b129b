#include "nqsite/wavefunction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nqsite/reduction.hpp"

namespace nqsite {

void PsiFunction::psi_batch(std::span<const SpinConfig> configs,
                            std::span<PsiValue> out) const {
  if (configs.size() != out.size())
    throw std::invalid_argument("psi_batch: size mismatch");
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)configs.size(); ++i)
    out[(std::size_t)i] = psi(configs[(std::size_t)i]);
}

TabulatedPsi::TabulatedPsi(const SectorIndex& sector,
                           std::vector<PsiValue> table)
    : sector_(&sector), table_(std::move(table)) {
  if (table_.size() != sector.dim())
    throw std::invalid_argument("table size does not match sector");
}

TabulatedPsi::TabulatedPsi(const SectorIndex& sector,
                           const Eigen::VectorXcd& amplitudes)
    : sector_(&sector) {
  if ((std::size_t)amplitudes.size() != sector.dim())
    throw std::invalid_argument("amplitude vector does not match sector");
  table_.resize(sector.dim());
  for (std::size_t k = 0; k < sector.dim(); ++k) {
    const double mag = std::abs(amplitudes[(Eigen::Index)k]);
    table_[k].log_rho = mag > 0.0 ? std::max(std::log(mag), -700.0) : -700.0;
    table_[k].phi = mag > 0.0 ? std::arg(amplitudes[(Eigen::Index)k]) : 0.0;
  }
}

Eigen::VectorXcd psi_vector(const PsiFunction& psi,
                            const SectorIndex& sector) {
  std::vector<SpinConfig> configs(sector.dim());
  for (std::size_t k = 0; k < sector.dim(); ++k) configs[k] = sector.config(k);
  std::vector<PsiValue> vals(sector.dim());
  psi.psi_batch(configs, vals);

  double max_lr = -std::numeric_limits<double>::infinity();
  for (const PsiValue& v : vals) max_lr = std::max(max_lr, v.log_rho);

  Eigen::VectorXcd out((Eigen::Index)sector.dim());
  for (std::size_t k = 0; k < sector.dim(); ++k)
    out[(Eigen::Index)k] =
        std::exp(std::complex<double>(vals[k].log_rho - max_lr, vals[k].phi));
  return out;
}

std::vector<double> exact_weights(const Eigen::VectorXcd& psi_vec) {
  std::vector<double> w((std::size_t)psi_vec.size());
  for (std::size_t k = 0; k < w.size(); ++k)
    w[k] = std::norm(psi_vec[(Eigen::Index)k]);
  const double z = pairwise_sum(w);
  if (!(z > 0.0)) throw std::runtime_error("wavefunction has zero norm");
  for (double& x : w) x /= z;
  return w;
}

std::vector<double> exact_weights(const PsiFunction& psi,
                                  const SectorIndex& sector) {
  return exact_weights(psi_vector(psi, sector));
}

}  // namespace nqsite
