#include "nqsite/ite_trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "nqsite/reduction.hpp"

namespace nqsite {

double lr_schedule(double alpha0, double alpha_f, std::uint64_t step,
                   std::uint64_t total_steps) {
  if (total_steps == 0) return alpha0;
  const double frac =
      std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
  return alpha0 * std::pow(alpha_f / alpha0, frac);
}

AdamState make_adam(std::size_t n_params, double beta1, double beta2,
                    double eps) {
  AdamState st;
  st.m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params));
  st.v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params));
  st.beta1 = beta1;
  st.beta2 = beta2;
  st.eps = eps;
  return st;
}

void adam_step(AdamState& st, Eigen::VectorXd& params,
               const Eigen::VectorXd& grad, double lr) {
  if (st.m.size() != grad.size() || params.size() != grad.size())
    throw std::invalid_argument("adam_step: size mismatch");
  ++st.t;
  st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
  st.v = st.beta2 * st.v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  params.array() -=
      lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + st.eps);
}

double target_energy(const EnergyMoments& m, double delta_tau) {
  const double dt = delta_tau;
  const double denom = 1.0 - 2.0 * dt * m.e1 + dt * dt * m.e2;
  if (!(denom > 0.0))
    throw std::domain_error("target_energy: evolved norm is not positive");
  const double num = m.e1 - 2.0 * dt * m.e2 + dt * dt * m.e3;
  return num / denom;
}

TimeStepSolve optimal_time_step(const EnergyMoments& m, double degeneracy_tol) {
  TimeStepSolve out;
  const double scale = std::max(1.0, m.e1 * m.e1);
  if (m.sigma2 <= degeneracy_tol * scale) {
    out.status = TimeStepStatus::degenerate;
    out.target_energy = m.e1;
    return out;
  }
  const double a = m.e2 * m.e2 - m.e1 * m.e3;
  const double b = m.e1 * m.e2 - m.e3;
  const double disc = b * b + 4.0 * a * m.sigma2;

  std::array<double, 2> cand{};
  int n_cand = 0;
  if (disc >= 0.0) {
    if (a == 0.0) {
      if (b != 0.0) cand[n_cand++] = -m.sigma2 / b;
    } else {
      // q carries the sign of b, so neither root suffers cancellation.
      const double q = b + std::copysign(std::sqrt(disc), b);
      if (q != 0.0) {
        cand[n_cand++] = q / (2.0 * a);
        cand[n_cand++] = -2.0 * m.sigma2 / q;
      }
    }
  }

  bool found = false;
  for (int i = 0; i < n_cand; ++i) {
    const double dt = cand[i];
    if (!(dt > 0.0) || !std::isfinite(dt)) continue;
    double e;
    try {
      e = target_energy(m, dt);
    } catch (const std::domain_error&) {
      continue;
    }
    if (!found || e < out.target_energy) {
      found = true;
      out.delta_tau = dt;
      out.target_energy = e;
    }
  }
  out.status = found ? TimeStepStatus::ok : TimeStepStatus::no_positive_root;
  return out;
}

namespace {

double safe_target_energy(const EnergyMoments& m, double dt) {
  try {
    return target_energy(m, dt);
  } catch (const std::domain_error&) {
    return m.e1;
  }
}

std::vector<SpinConfig> collect_samples(TrainState& st, const RunConfig& cfg,
                                        std::uint64_t n) {
  std::vector<SpinConfig> out;
  out.reserve(n);
  while (out.size() < n) {
    const auto batch = sample_batch(st.net, st.lattice, st.ensemble, cfg.n_skip);
    out.insert(out.end(), batch.begin(), batch.end());
  }
  out.resize(n);
  return out;
}

// Moments from the live tables; one extra H application when the exact
// third moment is requested.
EnergyMoments moments_from_cache(const TrainState& st, const RunConfig& cfg) {
  const auto& c = st.cache;
  const std::size_t n = c.weights.size();
  EnergyMoments m;
  m.n_samples = n;
  m.e3_mode = cfg.e3_mode;
  m.sigma_e = 0.0;

  std::vector<double> terms(n);
  for (std::size_t k = 0; k < n; ++k) terms[k] = c.weights[k] * c.h_loc[k].real();
  m.e1 = pairwise_sum(terms);
  for (std::size_t k = 0; k < n; ++k)
    terms[k] = c.weights[k] * std::norm(c.h_loc[k]);
  m.e2 = pairwise_sum(terms);
  if (cfg.e3_mode == E3Mode::exact) {
    Eigen::VectorXcd h2_psi(c.h_psi.size());
    apply_hamiltonian(st.lattice, cfg.couplings(), *st.sector, c.h_psi, h2_psi);
    std::vector<double> norm_terms(n);
    for (std::size_t k = 0; k < n; ++k) {
      terms[k] = (std::conj(c.h_psi[k]) * h2_psi[k]).real();
      norm_terms[k] = std::norm(c.psi[k]);
    }
    m.e3 = pairwise_sum(terms) / pairwise_sum(norm_terms);
  } else {
    for (std::size_t k = 0; k < n; ++k)
      terms[k] = c.weights[k] * c.h_loc[k].real() * std::norm(c.h_loc[k]);
    m.e3 = pairwise_sum(terms);
  }
  m.sigma2 = m.e2 - m.e1 * m.e1;
  return m;
}

void close_epoch(TrainState& st, bool stalled) {
  st.pending_epoch.steps = st.steps_in_epoch;
  st.pending_epoch.stalled = stalled;
  st.in_epoch = false;
  ++st.epoch;
}

StepRecord train_step_exact(TrainState& st, const RunConfig& cfg) {
  if (!st.cache.valid) refresh_exact_cache(st, cfg);
  const auto& c = st.cache;
  const std::size_t n = c.weights.size();
  const double lr = lr_schedule(cfg.alpha0, cfg.alpha_f, st.step, cfg.total_steps);

  std::vector<std::complex<double>> alpha(n);
  double loss = 0.0;
  if (cfg.loss == LossKind::ite) {
    // r_k = T_k / psi_k.  Both tables carry their own overall rescaling;
    // the mismatch is one constant factor, which cancels in r / <r> and in
    // the loss ratio.
    std::vector<std::complex<double>> r(n);
    for (std::size_t k = 0; k < n; ++k) {
      r[k] = c.psi[k] == std::complex<double>(0.0, 0.0)
                 ? std::complex<double>(0.0, 0.0)
                 : st.target_table[k] / c.psi[k];
      alpha[k] = c.weights[k] * r[k];  // stash w_k r_k for the mean
    }
    const std::complex<double> rbar = pairwise_sum(alpha);
    if (std::norm(rbar) == 0.0)
      throw std::runtime_error("train_step: overlap with the evolved target vanished");
    std::vector<double> abs2(n);
    for (std::size_t k = 0; k < n; ++k) abs2[k] = c.weights[k] * std::norm(r[k]);
    loss = -(std::log(std::norm(rbar)) - std::log(pairwise_sum(abs2)));
    for (std::size_t k = 0; k < n; ++k)
      alpha[k] = c.weights[k] * (1.0 - r[k] / rbar);
  } else {
    for (std::size_t k = 0; k < n; ++k) alpha[k] = c.weights[k] * c.h_loc[k];
    const std::complex<double> hbar = pairwise_sum(alpha);
    loss = hbar.real();
    for (std::size_t k = 0; k < n; ++k)
      alpha[k] = c.weights[k] * (c.h_loc[k] - hbar);
  }

  const Eigen::VectorXd grad = weighted_log_grad(st.net, st.cache.ws, alpha);
  adam_step(st.adam, st.net.params(), grad, lr);
  st.cache.valid = false;
  refresh_exact_cache(st, cfg);
  // Exact energies carry no sampling noise, so no smoothing is applied and
  // the threshold test sees the current energy directly.
  st.ema_energy = st.cache.energy;

  StepRecord rec;
  rec.step = st.step;
  rec.epoch = st.pending_epoch.epoch;
  rec.lr = lr;
  rec.delta_tau = st.delta_tau;
  rec.energy = st.ema_energy;
  rec.loss = loss;
  rec.acceptance = 1.0;
  ++st.step;
  ++st.steps_in_epoch;

  if (st.ema_energy < st.e_threshold) {
    close_epoch(st, false);
  } else if (st.steps_in_epoch >= cfg.max_steps_per_epoch) {
    close_epoch(st, true);
  }
  return rec;
}

StepRecord train_step_mcmc(TrainState& st, const RunConfig& cfg) {
  const Couplings cpl = cfg.couplings();
  const double lr = lr_schedule(cfg.alpha0, cfg.alpha_f, st.step, cfg.total_steps);

  st.ensemble.reset_counters();
  const auto samples = sample_batch(st.net, st.lattice, st.ensemble, cfg.n_skip);
  const double acceptance = st.ensemble.acceptance_rate();

  double loss = 0.0;
  double batch_energy = 0.0;
  if (cfg.loss == LossKind::ite) {
    auto res = ite_loss_grad(st.net, st.fixed_net, st.lattice, cpl, samples,
                             st.delta_tau);
    loss = res.loss;
    adam_step(st.adam, st.net.params(), res.grad, lr);
    // The energy fed to the moving average is measured on the updated
    // parameters, reusing the batch; this is the extra estimation pass the
    // overlap loss needs on top of its gradient.
    std::vector<std::complex<double>> h_loc(samples.size());
    local_energy_batch(st.net, st.lattice, cpl, samples, h_loc);
    batch_energy =
        pairwise_sum(h_loc).real() / static_cast<double>(samples.size());
  } else {
    auto res = e_loss_grad(st.net, st.lattice, cpl, samples);
    loss = res.mean_energy.real();
    // The energy-loss gradient already averages H_loc, so that estimate is
    // reused as the step's energy instead of a second evaluation pass.
    batch_energy = res.mean_energy.real();
    adam_step(st.adam, st.net.params(), res.grad, lr);
  }
  st.ema_energy =
      cfg.ema_decay * st.ema_energy + (1.0 - cfg.ema_decay) * batch_energy;

  StepRecord rec;
  rec.step = st.step;
  rec.epoch = st.pending_epoch.epoch;
  rec.lr = lr;
  rec.delta_tau = st.delta_tau;
  rec.energy = st.ema_energy;
  rec.loss = loss;
  rec.acceptance = acceptance;
  ++st.step;
  ++st.steps_in_epoch;

  if (st.ema_energy < st.e_threshold) {
    close_epoch(st, false);
  } else if (st.steps_in_epoch >= cfg.max_steps_per_epoch) {
    close_epoch(st, true);
  }
  return rec;
}

}  // namespace

TrainState::TrainState(const RunConfig& cfg)
    : lattice(build_lattice(cfg.d_lat)),
      net(cfg.architecture()),
      fixed_net(cfg.architecture()) {
  validate_config(cfg);
  net.init_params(cfg.seed);
  fixed_net.params() = net.params();
  adam = make_adam(net.n_params(), cfg.beta1, cfg.beta2, cfg.adam_eps);
  const int n_sites = lattice.n_sites;
  if (cfg.mode == RunMode::exact_sum) {
    sector.emplace(enumerate_sector(n_sites, n_sites / 2));
    sector_cfgs.resize(sector->dim());
    for (std::size_t k = 0; k < sector->dim(); ++k)
      sector_cfgs[k] = sector->config(k);
  } else {
    ensemble = init_ensemble(cfg.n_walkers, n_sites, n_sites / 2, cfg.seed);
  }
}

void refresh_exact_cache(TrainState& st, const RunConfig& cfg) {
  if (!st.sector)
    throw std::logic_error("refresh_exact_cache: state has no sector");
  const std::size_t n = st.sector->dim();
  auto& c = st.cache;
  c.vals.resize(n);
  st.net.forward(st.sector_cfgs, c.vals, &c.ws);

  double max_log = c.vals[0].log_rho;
  for (std::size_t k = 1; k < n; ++k)
    max_log = std::max(max_log, c.vals[k].log_rho);
  c.psi.resize(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k)
    c.psi[k] = std::exp(std::complex<double>(c.vals[k].log_rho - max_log,
                                             c.vals[k].phi));
  c.h_psi.resize(c.psi.size());
  apply_hamiltonian(st.lattice, cfg.couplings(), *st.sector, c.psi, c.h_psi);

  std::vector<double> born(n);
  for (std::size_t k = 0; k < n; ++k) born[k] = std::norm(c.psi[k]);
  const double z = pairwise_sum(born);
  if (!(z > 0.0))
    throw std::runtime_error("refresh_exact_cache: wavefunction norm vanished");
  c.weights.resize(n);
  c.h_loc.resize(n);
  std::vector<double> energy_terms(n);
  for (std::size_t k = 0; k < n; ++k) {
    c.weights[k] = born[k] / z;
    c.h_loc[k] = c.weights[k] > 0.0 ? c.h_psi[k] / c.psi[k]
                                    : std::complex<double>(0.0, 0.0);
    energy_terms[k] = c.weights[k] * c.h_loc[k].real();
  }
  c.energy = pairwise_sum(energy_terms);
  c.valid = true;
}

void begin_epoch(TrainState& st, const RunConfig& cfg) {
  const bool exact = cfg.mode == RunMode::exact_sum;
  EnergyMoments m;
  if (exact) {
    if (!st.cache.valid) refresh_exact_cache(st, cfg);
    m = moments_from_cache(st, cfg);
  } else {
    warmup(st.net, st.lattice, st.ensemble,
           static_cast<int>(cfg.resolved_warmup()));
    const auto samples = collect_samples(st, cfg, cfg.n_energy_samples);
    m = energy_moments(st.net, st.lattice, cfg.couplings(), samples,
                       cfg.e3_mode, cfg.blocked_se);
  }

  st.pending_epoch = EpochRecord{};
  st.pending_epoch.epoch = st.epoch;
  st.pending_epoch.start_step = st.step;
  st.pending_epoch.e1 = m.e1;
  st.pending_epoch.e2 = m.e2;
  st.pending_epoch.e3 = m.e3;
  st.pending_epoch.sigma2 = m.sigma2;
  st.pending_epoch.sigma_e = m.sigma_e;

  const auto solve = optimal_time_step(m, cfg.degeneracy_tol);
  if (solve.status == TimeStepStatus::degenerate) {
    st.pending_epoch.degenerate = true;
    st.pending_epoch.delta_tau = 0.0;
    st.pending_epoch.target_energy = m.e1;
    st.converged = true;
    return;
  }
  if (solve.status == TimeStepStatus::no_positive_root) {
    // Keep evolving with the previous epoch's step; on a first epoch with
    // no history fall back to a small fraction of the energy spread scale.
    if (!(st.delta_tau > 0.0))
      st.delta_tau = 0.01 / std::sqrt(std::max(m.sigma2, 1e-300));
    st.pending_epoch.target_energy = safe_target_energy(m, st.delta_tau);
  } else {
    st.delta_tau = solve.delta_tau;
    st.pending_epoch.target_energy = solve.target_energy;
  }
  st.pending_epoch.delta_tau = st.delta_tau;

  st.e_threshold = m.e1 - m.sigma_e;
  st.pending_epoch.e_threshold = st.e_threshold;
  st.ema_energy = m.e1;
  st.fixed_net.params() = st.net.params();
  if (exact)
    st.target_table = st.cache.psi - st.delta_tau * st.cache.h_psi;
  st.steps_in_epoch = 0;
  st.in_epoch = true;
}

StepRecord train_step(TrainState& st, const RunConfig& cfg) {
  if (!st.in_epoch)
    throw std::logic_error("train_step called outside an epoch");
  return cfg.mode == RunMode::exact_sum ? train_step_exact(st, cfg)
                                        : train_step_mcmc(st, cfg);
}

EpochRecord run_epoch(TrainState& st, const RunConfig& cfg) {
  if (!st.in_epoch && !st.converged) begin_epoch(st, cfg);
  while (st.in_epoch && !st.converged && st.step < cfg.total_steps)
    train_step(st, cfg);
  if (st.in_epoch) st.pending_epoch.steps = st.steps_in_epoch;
  return st.pending_epoch;
}

std::pair<double, double> measure_energy(TrainState& st, const RunConfig& cfg) {
  if (cfg.mode == RunMode::exact_sum) {
    if (!st.cache.valid) refresh_exact_cache(st, cfg);
    return {st.cache.energy, 0.0};
  }
  // Sample from a copy of the ensemble: measuring must not advance the
  // walker streams, or a paused-and-resumed run would train on different
  // samples than an uninterrupted one.
  WalkerEnsemble probe = st.ensemble;
  std::vector<SpinConfig> samples;
  samples.reserve(cfg.n_final_samples);
  while (samples.size() < cfg.n_final_samples) {
    const auto batch = sample_batch(st.net, st.lattice, probe, cfg.n_skip);
    samples.insert(samples.end(), batch.begin(), batch.end());
  }
  samples.resize(cfg.n_final_samples);
  const auto m = energy_moments(st.net, st.lattice, cfg.couplings(), samples,
                                E3Mode::approximate, cfg.blocked_se);
  return {m.e1, m.sigma_e};
}

RunLog train(const RunConfig& cfg, TrainState& st, const TrainHooks& hooks,
             std::uint64_t stop_at_step) {
  RunLog log;
  const std::uint64_t stop = std::min(cfg.total_steps, stop_at_step);
  while (!st.converged && st.step < stop) {
    if (!st.in_epoch) {
      begin_epoch(st, cfg);
      if (st.converged) {
        log.epochs.push_back(st.pending_epoch);
        if (hooks.on_epoch) hooks.on_epoch(st.pending_epoch, st);
        break;
      }
    }
    const auto t0 = std::chrono::steady_clock::now();
    const StepRecord rec = train_step(st, cfg);
    const auto t1 = std::chrono::steady_clock::now();
    log.step_wall_ms.push_back(
        std::chrono::duration<double, std::milli>(t1 - t0).count());
    log.steps.push_back(rec);
    if (hooks.on_step) hooks.on_step(rec, st);
    if (!st.in_epoch) {
      log.epochs.push_back(st.pending_epoch);
      if (hooks.on_epoch) hooks.on_epoch(st.pending_epoch, st);
    }
  }
  if (st.in_epoch) {
    // Budget ran out mid-epoch; record the partial epoch but leave the
    // state resumable.
    st.pending_epoch.steps = st.steps_in_epoch;
    log.epochs.push_back(st.pending_epoch);
    if (hooks.on_epoch) hooks.on_epoch(st.pending_epoch, st);
  }

  const auto [energy, sigma] = measure_energy(st, cfg);
  log.summary.steps_run = st.step;
  log.summary.epochs = log.epochs.size();
  log.summary.final_energy = energy;
  log.summary.final_energy_per_site = energy / st.lattice.n_sites;
  log.summary.final_sigma_e = sigma;
  log.summary.converged_degenerate = st.converged;
  log.summary.config_hash = config_hash(cfg);
  log.summary.seed = cfg.seed;
  log.summary.mode = to_string(cfg.mode);
  log.summary.loss = to_string(cfg.loss);
  return log;
}

RunLog train(const RunConfig& cfg, const TrainHooks& hooks) {
  TrainState st(cfg);
  return train(cfg, st, hooks);
}

}  // namespace nqsite
