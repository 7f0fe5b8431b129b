#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "nqsite/config.hpp"
#include "nqsite/estimators.hpp"
#include "nqsite/hilbert.hpp"
#include "nqsite/lattice.hpp"
#include "nqsite/nqs_model.hpp"
#include "nqsite/run_log.hpp"
#include "nqsite/sampler.hpp"

namespace nqsite {

// Geometric decay from alpha0 at step 0 to alpha_f at step total_steps.
double lr_schedule(double alpha0, double alpha_f, std::uint64_t step,
                   std::uint64_t total_steps);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(std::size_t n_params, double beta1, double beta2,
                    double eps);

// One bias-corrected first-order update, in place.
void adam_step(AdamState& st, Eigen::VectorXd& params,
               const Eigen::VectorXd& grad, double lr);

enum class TimeStepStatus { ok, degenerate, no_positive_root };

struct TimeStepSolve {
  TimeStepStatus status = TimeStepStatus::ok;
  double delta_tau = 0.0;
  double target_energy = 0.0;
};

// Energy of the first-order evolved state (1 - dt H) |psi| as a rational
// function of dt in the first three energy moments:
//   E_T(dt) = (e1 - 2 dt e2 + dt^2 e3) / (1 - 2 dt e1 + dt^2 e2).
// Throws std::domain_error when the evolved norm is not positive.
double target_energy(const EnergyMoments& m, double delta_tau);

// Stationary points of E_T solve A dt^2 - B dt - sigma^2 = 0 with
// A = e2^2 - e1 e3, B = e1 e2 - e3.  The quadratic is solved in its
// cancellation-free form and the positive root with the lower target
// energy is returned.  When sigma^2 <= degeneracy_tol * max(1, e1^2) the
// state is an eigenstate to working precision and the solve reports
// `degenerate`.
TimeStepSolve optimal_time_step(const EnergyMoments& m,
                                double degeneracy_tol = 1e-12);

// Live exact-summation tables of the current parameters over the whole
// sector, refreshed after every update: forward activations (kept for the
// reverse pass), rescaled amplitudes, H psi, Born weights, local energies,
// and the weighted energy.
struct ExactCache {
  ForwardWorkspace ws;
  std::vector<PsiValue> vals;
  Eigen::VectorXcd psi;
  Eigen::VectorXcd h_psi;
  std::vector<double> weights;
  std::vector<std::complex<double>> h_loc;
  double energy = 0.0;
  bool valid = false;
};

// Everything that evolves during a run.  The checkpoint module serializes
// the reproducibility-relevant fields; caches are rebuilt on load.
struct TrainState {
  explicit TrainState(const RunConfig& cfg);

  Lattice lattice;
  NqsNetwork net;
  NqsNetwork fixed_net;
  AdamState adam;
  WalkerEnsemble ensemble;              // MCMC mode
  std::optional<SectorIndex> sector;    // exact-summation mode
  std::vector<SpinConfig> sector_cfgs;  // sector enumeration as configs
  ExactCache cache;
  Eigen::VectorXcd target_table;        // (1 - dt H) psi_fixed over the sector

  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::uint64_t steps_in_epoch = 0;
  double delta_tau = 0.0;
  double e_threshold = 0.0;
  double ema_energy = 0.0;
  bool in_epoch = false;
  bool converged = false;
  EpochRecord pending_epoch;
};

// Rebuilds the exact-summation tables for the current parameters.
void refresh_exact_cache(TrainState& st, const RunConfig& cfg);

// Epoch preamble: measure energy moments (10 d^2 warmup sweeps + fresh
// samples in MCMC mode, Born-weighted sums in exact mode), solve for the
// time step, set the stopping threshold <E> - sigma_E, and freeze the
// current network as the evolution target.  A degenerate solve marks the
// run converged.  A solve without a positive root falls back to the
// previous epoch's step size.
void begin_epoch(TrainState& st, const RunConfig& cfg);

// One descent step inside an epoch: gradient of the configured loss,
// Adam update, post-update energy estimate, and the epoch termination
// test (smoothed energy below threshold, or the per-epoch step cap).
StepRecord train_step(TrainState& st, const RunConfig& cfg);

// Runs one full epoch (begins it if needed); returns its record.
EpochRecord run_epoch(TrainState& st, const RunConfig& cfg);

// Energy of the current state: exact weighted sum, or a fresh sample of
// n_final_samples configurations.  Returns {energy, standard error}.
std::pair<double, double> measure_energy(TrainState& st, const RunConfig& cfg);

struct TrainHooks {
  std::function<void(const StepRecord&, const TrainState&)> on_step;
  std::function<void(const EpochRecord&, const TrainState&)> on_epoch;
};

// Full training loop up to min(cfg.total_steps, stop_at_step), starting
// from (or resuming) `st`.  Appends per-step and per-epoch records and
// finishes with a final energy measurement.
RunLog train(const RunConfig& cfg, TrainState& st, const TrainHooks& hooks = {},
             std::uint64_t stop_at_step = UINT64_MAX);

// Convenience: fresh state from the config seed.
RunLog train(const RunConfig& cfg, const TrainHooks& hooks = {});

}  // namespace nqsite
