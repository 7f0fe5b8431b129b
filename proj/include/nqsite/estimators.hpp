#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "nqsite/hamiltonian.hpp"
#include "nqsite/nqs_model.hpp"
#include "nqsite/wavefunction.hpp"

namespace nqsite {

// H_loc(s) = sum_s' H_{s s'} psi(s') / psi(s), evaluated in log space.
std::complex<double> local_energy(const PsiFunction& psi, const Lattice& lat,
                                  const Couplings& cpl, SpinConfig s);

// Batched version; one wavefunction evaluation sweep over all samples and
// their connected configurations.  Optionally returns psi at the samples.
void local_energy_batch(const PsiFunction& psi, const Lattice& lat,
                        const Couplings& cpl,
                        std::span<const SpinConfig> configs,
                        std::span<std::complex<double>> h_loc,
                        std::vector<PsiValue>* base_vals = nullptr);

// (H^2)_loc(s) = sum_s'' H_{s s''} (psi(s'')/psi(s)) H_loc(s''), the nested
// two-level sum.  Exact but quadratic in the connectivity; used for
// verification-grade third moments.
std::complex<double> local_energy_sq(const PsiFunction& psi,
                                     const Lattice& lat, const Couplings& cpl,
                                     SpinConfig s);

enum class E3Mode { approximate, exact };

struct EnergyMoments {
  double e1 = 0.0;      // <E>    = Re mean H_loc
  double e2 = 0.0;      // <E^2>  = mean |H_loc|^2
  double e3 = 0.0;      // <E^3>, exact or approximate per e3_mode
  double sigma2 = 0.0;  // <E^2> - <E>^2
  double sigma_e = 0.0; // standard error of e1 (0 for exact sums)
  std::size_t n_samples = 0;
  E3Mode e3_mode = E3Mode::approximate;
};

// Moments from Monte Carlo samples.  e3 exact uses the nested sum; the
// approximate form is mean Re(H_loc |H_loc|^2).  sigma_e defaults to the
// naive i.i.d. estimator; blocked_se switches to 16-block batch means.
EnergyMoments energy_moments(const PsiFunction& psi, const Lattice& lat,
                             const Couplings& cpl,
                             std::span<const SpinConfig> samples, E3Mode mode,
                             bool blocked_se = false);

// Born-weighted sums over a full sector.  Local values come from sector
// tables (two Hamiltonian applications); components with zero weight are
// skipped.  sigma_e is exactly zero.
EnergyMoments energy_moments_exact(const PsiFunction& psi, const Lattice& lat,
                                   const Couplings& cpl,
                                   const SectorIndex& sector, E3Mode mode);

// psi, H psi, Born weights and H_loc of one wavefunction over a sector.
struct SectorTables {
  Eigen::VectorXcd psi;    // rescaled so max |log| component is 1
  Eigen::VectorXcd h_psi;
  std::vector<double> weights;
  std::vector<std::complex<double>> h_loc;
};
SectorTables sector_tables(const PsiFunction& psi, const Lattice& lat,
                           const Couplings& cpl, const SectorIndex& sector);

// Euler step target over a sector: T = (1 - delta_tau H) psi_fixed.
Eigen::VectorXcd euler_target_table(const PsiFunction& fixed,
                                    const Lattice& lat, const Couplings& cpl,
                                    const SectorIndex& sector,
                                    double delta_tau);

// L = -log( |<psi|T>|^2 / (<psi|psi> <T|T>) ); +infinity when the overlap
// vanishes.
double ite_loss_exact(const PsiFunction& psi, const SectorIndex& sector,
                      const Eigen::VectorXcd& target);

// Adjoint-weighted parameter gradient: with g_s = d(log rho)/d theta
// - i d(phi)/d theta, returns sum_s 2 Re( alpha_s conj-free g_s ), i.e.
// sum_s [ 2 Re(alpha_s) d(log rho_s) + 2 Im(alpha_s) d(phi_s) ].
Eigen::VectorXd weighted_log_grad(const NqsNetwork& net,
                                  const ForwardWorkspace& ws,
                                  std::span<const std::complex<double>> alpha);

struct IteGradResult {
  Eigen::VectorXd grad;
  double loss = 0.0;  // -log(|<r>|^2 / <|r|^2>) from the same samples
  std::complex<double> mean_ratio{0.0, 0.0};
};

// Overlap-loss gradient from samples of |psi|^2 with a frozen target
// network: r(s) = (psi_f(s)/psi(s)) (1 - delta_tau H_loc^f(s)) and
// d L = 2 Re{ <g> - <r g> / <r> }.
IteGradResult ite_loss_grad(NqsNetwork& net, const PsiFunction& fixed,
                            const Lattice& lat, const Couplings& cpl,
                            std::span<const SpinConfig> samples,
                            double delta_tau);

// Same gradient as an exact Born-weighted sum over a sector.
IteGradResult ite_loss_grad_exact(NqsNetwork& net, const PsiFunction& fixed,
                                  const Lattice& lat, const Couplings& cpl,
                                  const SectorIndex& sector, double delta_tau);

struct ELossGradResult {
  Eigen::VectorXd grad;
  std::complex<double> mean_energy{0.0, 0.0};
};

// Plain energy-loss gradient 2 Re{ <H_loc g> - <H_loc><g> }.
ELossGradResult e_loss_grad(NqsNetwork& net, const Lattice& lat,
                            const Couplings& cpl,
                            std::span<const SpinConfig> samples);
ELossGradResult e_loss_grad_exact(NqsNetwork& net, const Lattice& lat,
                                  const Couplings& cpl,
                                  const SectorIndex& sector);

}  // namespace nqsite
