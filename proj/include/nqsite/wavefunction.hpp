#pragma once

#include <Eigen/Dense>
#include <complex>
#include <span>
#include <vector>

#include "nqsite/hilbert.hpp"

namespace nqsite {

// Wavefunction value in log form: psi(s) = exp(log_rho + i * phi).
struct PsiValue {
  double log_rho = 0.0;
  double phi = 0.0;
};

inline std::complex<double> log_psi(PsiValue v) { return {v.log_rho, v.phi}; }

// Anything that evaluates psi(s).  The network implements this, and tests
// drive samplers/estimators with tabulated stand-ins (e.g. exact
// eigenvectors).
class PsiFunction {
 public:
  virtual ~PsiFunction() = default;
  virtual int n_sites() const = 0;
  virtual PsiValue psi(SpinConfig s) const = 0;
  virtual void psi_batch(std::span<const SpinConfig> configs,
                         std::span<PsiValue> out) const;
};

// psi given by an explicit table over one sector.
class TabulatedPsi : public PsiFunction {
 public:
  TabulatedPsi(const SectorIndex& sector, std::vector<PsiValue> table);
  // From complex amplitudes; log|a| is floored so zero amplitudes stay
  // representable.
  TabulatedPsi(const SectorIndex& sector, const Eigen::VectorXcd& amplitudes);

  int n_sites() const override { return sector_->n_sites(); }
  PsiValue psi(SpinConfig s) const override {
    return table_[sector_->ordinal(s)];
  }
  const std::vector<PsiValue>& table() const { return table_; }

 private:
  const SectorIndex* sector_;
  std::vector<PsiValue> table_;
};

// psi over a whole sector, rescaled by exp(-max log_rho) so the largest
// amplitude is 1.  The common rescaling cancels in every normalized
// quantity built from the table.
Eigen::VectorXcd psi_vector(const PsiFunction& psi, const SectorIndex& sector);

// Born weights |psi(s)|^2 / sum |psi|^2 over the sector.
std::vector<double> exact_weights(const PsiFunction& psi,
                                  const SectorIndex& sector);
std::vector<double> exact_weights(const Eigen::VectorXcd& psi_vec);

}  // namespace nqsite
