#include "nqsite/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nqsite/reduction.hpp"

namespace nqsite {

namespace {

constexpr std::size_t kEvalChunk = 8192;

std::vector<SpinConfig> sector_configs(const SectorIndex& sector) {
  std::vector<SpinConfig> configs(sector.dim());
  for (std::size_t k = 0; k < sector.dim(); ++k) configs[k] = sector.config(k);
  return configs;
}

// shifted amplitudes exp(log_rho - max_log_rho + i phi) from raw values
Eigen::VectorXcd shifted_amplitudes(const std::vector<PsiValue>& vals) {
  double max_lr = -std::numeric_limits<double>::infinity();
  for (const PsiValue& v : vals) max_lr = std::max(max_lr, v.log_rho);
  Eigen::VectorXcd out((Eigen::Index)vals.size());
  for (std::size_t k = 0; k < vals.size(); ++k)
    out[(Eigen::Index)k] =
        std::exp(std::complex<double>(vals[k].log_rho - max_lr, vals[k].phi));
  return out;
}

}  // namespace

void local_energy_batch(const PsiFunction& psi, const Lattice& lat,
                        const Couplings& cpl,
                        std::span<const SpinConfig> configs,
                        std::span<std::complex<double>> h_loc,
                        std::vector<PsiValue>* base_vals) {
  const std::size_t n = configs.size();
  if (h_loc.size() != n)
    throw std::invalid_argument("local_energy_batch: output size mismatch");
  if (base_vals != nullptr) base_vals->resize(n);

  for (std::size_t chunk = 0; chunk < n; chunk += kEvalChunk) {
    const std::size_t end = std::min(n, chunk + kEvalChunk);
    const std::size_t cn = end - chunk;

    std::vector<ConnectedSet> rows(cn);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)cn; ++i)
      rows[(std::size_t)i] = connected(lat, cpl, configs[chunk + (std::size_t)i]);

    // one flat evaluation list: each sample followed by its connected set
    std::vector<std::size_t> start(cn + 1);
    start[0] = 0;
    for (std::size_t i = 0; i < cn; ++i)
      start[i + 1] = start[i] + 1 + rows[i].off_diag.size();
    std::vector<SpinConfig> evals(start[cn]);
    for (std::size_t i = 0; i < cn; ++i) {
      evals[start[i]] = configs[chunk + i];
      for (std::size_t e = 0; e < rows[i].off_diag.size(); ++e)
        evals[start[i] + 1 + e] = rows[i].off_diag[e].config;
    }
    std::vector<PsiValue> vals(evals.size());
    psi.psi_batch(evals, vals);

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)cn; ++i) {
      const std::size_t ii = (std::size_t)i;
      const PsiValue base = vals[start[ii]];
      std::complex<double> acc(rows[ii].diagonal, 0.0);
      for (std::size_t e = 0; e < rows[ii].off_diag.size(); ++e) {
        const PsiValue v = vals[start[ii] + 1 + e];
        acc += rows[ii].off_diag[e].amplitude *
               std::exp(std::complex<double>(v.log_rho - base.log_rho,
                                             v.phi - base.phi));
      }
      h_loc[chunk + ii] = acc;
      if (base_vals != nullptr) (*base_vals)[chunk + ii] = base;
    }
  }
}

std::complex<double> local_energy(const PsiFunction& psi, const Lattice& lat,
                                  const Couplings& cpl, SpinConfig s) {
  std::complex<double> h;
  local_energy_batch(psi, lat, cpl, std::span<const SpinConfig>(&s, 1),
                     std::span<std::complex<double>>(&h, 1));
  return h;
}

std::complex<double> local_energy_sq(const PsiFunction& psi,
                                     const Lattice& lat, const Couplings& cpl,
                                     SpinConfig s) {
  const ConnectedSet row = connected(lat, cpl, s);
  std::vector<SpinConfig> level(1 + row.off_diag.size());
  level[0] = s;
  for (std::size_t e = 0; e < row.off_diag.size(); ++e)
    level[1 + e] = row.off_diag[e].config;

  std::vector<std::complex<double>> h_loc(level.size());
  std::vector<PsiValue> vals;
  local_energy_batch(psi, lat, cpl, level, h_loc, &vals);

  // sum over intermediate states s'': H_{s s''} (psi(s'')/psi(s)) H_loc(s'')
  std::complex<double> acc = row.diagonal * h_loc[0];
  for (std::size_t e = 0; e < row.off_diag.size(); ++e) {
    const std::complex<double> ratio =
        std::exp(std::complex<double>(vals[1 + e].log_rho - vals[0].log_rho,
                                      vals[1 + e].phi - vals[0].phi));
    acc += row.off_diag[e].amplitude * ratio * h_loc[1 + e];
  }
  return acc;
}

EnergyMoments energy_moments(const PsiFunction& psi, const Lattice& lat,
                             const Couplings& cpl,
                             std::span<const SpinConfig> samples, E3Mode mode,
                             bool blocked_se) {
  const std::size_t n = samples.size();
  if (n == 0) throw std::invalid_argument("energy_moments: no samples");

  std::vector<std::complex<double>> h(n);
  local_energy_batch(psi, lat, cpl, samples, h);

  std::vector<double> re(n), abs2(n), re2(n), e3t(n);
  if (mode == E3Mode::exact) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < (std::ptrdiff_t)n; ++i) {
      const std::complex<double> h2 =
          local_energy_sq(psi, lat, cpl, samples[(std::size_t)i]);
      e3t[(std::size_t)i] = std::real(std::conj(h[(std::size_t)i]) * h2);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = h[i].real();
    abs2[i] = std::norm(h[i]);
    re2[i] = re[i] * re[i];
    if (mode == E3Mode::approximate) e3t[i] = re[i] * abs2[i];
  }

  EnergyMoments m;
  m.n_samples = n;
  m.e3_mode = mode;
  m.e1 = pairwise_sum(re) / (double)n;
  m.e2 = pairwise_sum(abs2) / (double)n;
  m.e3 = pairwise_sum(e3t) / (double)n;
  m.sigma2 = m.e2 - m.e1 * m.e1;

  if (blocked_se && n >= 32) {
    // standard error from 16 consecutive block means
    const std::size_t nb = 16;
    std::vector<double> means(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t lo = b * n / nb, hi = (b + 1) * n / nb;
      means[b] = pairwise_sum(re.data() + lo, hi - lo) / (double)(hi - lo);
    }
    double mu = pairwise_sum(means) / (double)nb;
    double var = 0.0;
    for (double x : means) var += (x - mu) * (x - mu);
    m.sigma_e = std::sqrt(var / (double)(nb * (nb - 1)));
  } else {
    const double var = std::max(0.0, pairwise_sum(re2) / (double)n -
                                         m.e1 * m.e1);
    m.sigma_e = std::sqrt(var / (double)n);
  }
  return m;
}

SectorTables sector_tables(const PsiFunction& psi, const Lattice& lat,
                           const Couplings& cpl, const SectorIndex& sector) {
  SectorTables t;
  t.psi = psi_vector(psi, sector);
  t.weights = exact_weights(t.psi);
  apply_hamiltonian(lat, cpl, sector, t.psi, t.h_psi);
  t.h_loc.resize(sector.dim());
  for (std::size_t k = 0; k < sector.dim(); ++k)
    t.h_loc[k] = t.weights[k] > 0.0
                     ? t.h_psi[(Eigen::Index)k] / t.psi[(Eigen::Index)k]
                     : std::complex<double>(0.0, 0.0);
  return t;
}

EnergyMoments energy_moments_exact(const PsiFunction& psi, const Lattice& lat,
                                   const Couplings& cpl,
                                   const SectorIndex& sector, E3Mode mode) {
  const SectorTables t = sector_tables(psi, lat, cpl, sector);
  const std::size_t dim = sector.dim();

  std::vector<double> e1c(dim), e2c(dim), e3c(dim);
  if (mode == E3Mode::exact) {
    Eigen::VectorXcd h2_psi;
    apply_hamiltonian(lat, cpl, sector, t.h_psi, h2_psi);
    for (std::size_t k = 0; k < dim; ++k) {
      if (t.weights[k] > 0.0) {
        const std::complex<double> h2loc =
            h2_psi[(Eigen::Index)k] / t.psi[(Eigen::Index)k];
        e3c[k] = t.weights[k] * std::real(std::conj(t.h_loc[k]) * h2loc);
      }
    }
  }
  for (std::size_t k = 0; k < dim; ++k) {
    const double w = t.weights[k];
    e1c[k] = w * t.h_loc[k].real();
    e2c[k] = w * std::norm(t.h_loc[k]);
    if (mode == E3Mode::approximate)
      e3c[k] = w * t.h_loc[k].real() * std::norm(t.h_loc[k]);
  }

  EnergyMoments m;
  m.n_samples = dim;
  m.e3_mode = mode;
  m.e1 = pairwise_sum(e1c);
  m.e2 = pairwise_sum(e2c);
  m.e3 = pairwise_sum(e3c);
  m.sigma2 = m.e2 - m.e1 * m.e1;
  m.sigma_e = 0.0;  // sums are exact, no sampling error
  return m;
}

Eigen::VectorXcd euler_target_table(const PsiFunction& fixed,
                                    const Lattice& lat, const Couplings& cpl,
                                    const SectorIndex& sector,
                                    double delta_tau) {
  Eigen::VectorXcd psi_f = psi_vector(fixed, sector);
  Eigen::VectorXcd h_psi;
  apply_hamiltonian(lat, cpl, sector, psi_f, h_psi);
  return psi_f - delta_tau * h_psi;
}

double ite_loss_exact(const PsiFunction& psi, const SectorIndex& sector,
                      const Eigen::VectorXcd& target) {
  if ((std::size_t)target.size() != sector.dim())
    throw std::invalid_argument("target table does not match sector");
  const Eigen::VectorXcd p = psi_vector(psi, sector);
  const std::size_t dim = sector.dim();
  std::vector<std::complex<double>> ov(dim);
  std::vector<double> nn(dim), tt(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    ov[k] = std::conj(p[(Eigen::Index)k]) * target[(Eigen::Index)k];
    nn[k] = std::norm(p[(Eigen::Index)k]);
    tt[k] = std::norm(target[(Eigen::Index)k]);
  }
  const std::complex<double> a = pairwise_sum(ov);
  const double b = pairwise_sum(nn);
  const double c = pairwise_sum(tt);
  if (!(b > 0.0)) throw std::runtime_error("wavefunction has zero norm");
  if (!(c > 0.0) || std::abs(a) == 0.0)
    return std::numeric_limits<double>::infinity();
  return -(2.0 * std::log(std::abs(a)) - std::log(b) - std::log(c));
}

Eigen::VectorXd weighted_log_grad(const NqsNetwork& net,
                                  const ForwardWorkspace& ws,
                                  std::span<const std::complex<double>> alpha) {
  if ((Eigen::Index)alpha.size() != ws.n)
    throw std::invalid_argument("weighted_log_grad: size mismatch");
  Eigen::Matrix2Xd adjoint(2, ws.n);
  for (Eigen::Index s = 0; s < ws.n; ++s) {
    adjoint(0, s) = 2.0 * alpha[(std::size_t)s].real();
    adjoint(1, s) = 2.0 * alpha[(std::size_t)s].imag();
  }
  return net.backward(ws, adjoint);
}

IteGradResult ite_loss_grad(NqsNetwork& net, const PsiFunction& fixed,
                            const Lattice& lat, const Couplings& cpl,
                            std::span<const SpinConfig> samples,
                            double delta_tau) {
  const std::size_t n = samples.size();
  if (n == 0) throw std::invalid_argument("ite_loss_grad: no samples");

  ForwardWorkspace ws;
  std::vector<PsiValue> unused(n);
  net.forward(samples, unused, &ws);
  // The ratio uses evaluation-path values for both networks, so when the
  // live and frozen parameters coincide the log-differences cancel exactly
  // and the per-sample weights vanish identically.
  std::vector<PsiValue> live(n);
  net.psi_batch(samples, live);

  std::vector<std::complex<double>> hloc_f(n);
  std::vector<PsiValue> fixed_vals;
  local_energy_batch(fixed, lat, cpl, samples, hloc_f, &fixed_vals);

  // r(s) = psi_T(s)/psi(s), psi_T from the frozen network
  std::vector<std::complex<double>> r(n), alpha(n);
  std::vector<double> r2(n);
  for (std::size_t k = 0; k < n; ++k) {
    r[k] = std::exp(std::complex<double>(
               fixed_vals[k].log_rho - live[k].log_rho,
               fixed_vals[k].phi - live[k].phi)) *
           (1.0 - delta_tau * hloc_f[k]);
    r2[k] = std::norm(r[k]);
  }
  const std::complex<double> rbar = pairwise_sum(r) / (double)n;
  if (std::abs(rbar) == 0.0)
    throw std::runtime_error("overlap with the evolution target vanished");
  for (std::size_t k = 0; k < n; ++k)
    alpha[k] = (1.0 - r[k] / rbar) / (double)n;

  IteGradResult out;
  out.grad = weighted_log_grad(net, ws, alpha);
  out.mean_ratio = rbar;
  out.loss = -std::log(std::norm(rbar) / (pairwise_sum(r2) / (double)n));
  return out;
}

IteGradResult ite_loss_grad_exact(NqsNetwork& net, const PsiFunction& fixed,
                                  const Lattice& lat, const Couplings& cpl,
                                  const SectorIndex& sector,
                                  double delta_tau) {
  const std::vector<SpinConfig> configs = sector_configs(sector);
  const std::size_t dim = sector.dim();

  ForwardWorkspace ws;
  std::vector<PsiValue> live(dim);
  net.forward(configs, live, &ws);
  const Eigen::VectorXcd psi = shifted_amplitudes(live);
  const std::vector<double> w = exact_weights(psi);

  const Eigen::VectorXcd target =
      euler_target_table(fixed, lat, cpl, sector, delta_tau);

  // constant scale factors between the two tables cancel in r / <r>
  std::vector<std::complex<double>> r(dim), wr(dim), alpha(dim);
  std::vector<double> wr2(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    r[k] = target[(Eigen::Index)k] / psi[(Eigen::Index)k];
    wr[k] = w[k] * r[k];
    wr2[k] = w[k] * std::norm(r[k]);
  }
  const std::complex<double> rbar = pairwise_sum(wr);
  if (std::abs(rbar) == 0.0)
    throw std::runtime_error("overlap with the evolution target vanished");
  for (std::size_t k = 0; k < dim; ++k)
    alpha[k] = w[k] * (1.0 - r[k] / rbar);

  IteGradResult out;
  out.grad = weighted_log_grad(net, ws, alpha);
  out.mean_ratio = rbar;
  out.loss = -std::log(std::norm(rbar) / pairwise_sum(wr2));
  return out;
}

ELossGradResult e_loss_grad(NqsNetwork& net, const Lattice& lat,
                            const Couplings& cpl,
                            std::span<const SpinConfig> samples) {
  const std::size_t n = samples.size();
  if (n == 0) throw std::invalid_argument("e_loss_grad: no samples");

  ForwardWorkspace ws;
  std::vector<PsiValue> live(n);
  net.forward(samples, live, &ws);

  std::vector<std::complex<double>> hloc(n), beta(n);
  local_energy_batch(net, lat, cpl, samples, hloc);
  const std::complex<double> hbar = pairwise_sum(hloc) / (double)n;
  for (std::size_t k = 0; k < n; ++k) beta[k] = (hloc[k] - hbar) / (double)n;

  ELossGradResult out;
  out.grad = weighted_log_grad(net, ws, beta);
  out.mean_energy = hbar;
  return out;
}

ELossGradResult e_loss_grad_exact(NqsNetwork& net, const Lattice& lat,
                                  const Couplings& cpl,
                                  const SectorIndex& sector) {
  const std::vector<SpinConfig> configs = sector_configs(sector);
  const std::size_t dim = sector.dim();

  ForwardWorkspace ws;
  std::vector<PsiValue> live(dim);
  net.forward(configs, live, &ws);
  const Eigen::VectorXcd psi = shifted_amplitudes(live);
  const std::vector<double> w = exact_weights(psi);

  Eigen::VectorXcd h_psi;
  apply_hamiltonian(lat, cpl, sector, psi, h_psi);

  std::vector<std::complex<double>> whloc(dim), beta(dim);
  std::vector<std::complex<double>> hloc(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    hloc[k] = h_psi[(Eigen::Index)k] / psi[(Eigen::Index)k];
    whloc[k] = w[k] * hloc[k];
  }
  const std::complex<double> hbar = pairwise_sum(whloc);
  for (std::size_t k = 0; k < dim; ++k) beta[k] = w[k] * (hloc[k] - hbar);

  ELossGradResult out;
  out.grad = weighted_log_grad(net, ws, beta);
  out.mean_energy = hbar;
  return out;
}

}  // namespace nqsite
