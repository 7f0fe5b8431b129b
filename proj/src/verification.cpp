#include "nqsite/verification.hpp"

#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unistd.h>
#include <vector>

#include "nqsite/config.hpp"
#include "nqsite/ed_oracle.hpp"
#include "nqsite/estimators.hpp"
#include "nqsite/hamiltonian.hpp"
#include "nqsite/hilbert.hpp"
#include "nqsite/ite_trainer.hpp"
#include "nqsite/lattice.hpp"
#include "nqsite/nqs_model.hpp"
#include "nqsite/reduction.hpp"
#include "nqsite/rng.hpp"
#include "nqsite/run_log.hpp"
#include "nqsite/sampler.hpp"
#include "nqsite/wavefunction.hpp"

namespace nqsite {
namespace {

std::string fmtg(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

double rel_err(double value, double reference, double floor_scale) {
  return std::abs(value - reference) /
         std::max({std::abs(value), std::abs(reference), floor_scale});
}

Eigen::VectorXcd apply_sparse(const Eigen::SparseMatrix<double>& h,
                              const Eigen::VectorXcd& x) {
  const Eigen::VectorXd xr = x.real();
  const Eigen::VectorXd xi = x.imag();
  const Eigen::VectorXd yr = h * xr;
  const Eigen::VectorXd yi = h * xi;
  Eigen::VectorXcd y(x.size());
  y.real() = yr;
  y.imag() = yi;
  return y;
}

Eigen::VectorXcd gaussian_state(Eigen::Index dim, CounterRng& rng) {
  Eigen::VectorXcd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    // Box-Muller from two uniforms per complex component.
    const double u1 = std::max(rng.next_double(), 1e-300);
    const double u2 = rng.next_double();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    v[i] = {rad * std::cos(ang), rad * std::sin(ang)};
  }
  return v;
}

// <E>, <E^2>, <E^3> of an explicit state via the sparse sector matrix; the
// reference side of the moment checks.
struct MatrixMoments {
  double e1 = 0, e2 = 0, e3 = 0;
};

MatrixMoments matrix_moments(const Eigen::SparseMatrix<double>& h,
                             const Eigen::VectorXcd& psi) {
  const double n2 = psi.squaredNorm();
  const Eigen::VectorXcd hp = apply_sparse(h, psi);
  const Eigen::VectorXcd h2p = apply_sparse(h, hp);
  MatrixMoments m;
  m.e1 = psi.dot(hp).real() / n2;
  m.e2 = hp.squaredNorm() / n2;
  m.e3 = hp.dot(h2p).real() / n2;
  return m;
}

double exact_energy(const PsiFunction& psi, const Lattice& lat,
                    const Couplings& cpl, const SectorIndex& sector) {
  const Eigen::VectorXcd p = psi_vector(psi, sector);
  Eigen::VectorXcd hp(p.size());
  apply_hamiltonian(lat, cpl, sector, p, hp);
  return p.dot(hp).real() / p.squaredNorm();
}

const double kJ2Cycle[5] = {0.0, 0.2, 0.5, 0.8, 1.0};

Architecture small_arch(int width, int depth) {
  Architecture a;
  a.d_lat = 4;
  a.d_p = 2;
  a.d_enc = 4;
  a.width = width;
  a.depth = depth;
  a.a_sat = 20.0;
  a.activation = Activation::gelu;
  return a;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + p.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

double sample_std(const std::vector<double>& xs) {
  const double n = static_cast<double>(xs.size());
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace

CheckResult check_moment_identities() {
  CheckResult res{1, "moment-identities", false, ""};
  const Lattice lat = build_lattice(4);
  const SectorIndex sector = enumerate_sector(16, 8);
  double worst = 0;
  for (int k = 0; k < 20; ++k) {
    const Couplings cpl{1.0, kJ2Cycle[k % 5]};
    NqsNetwork net(small_arch(16, 2));
    net.init_params(1000 + static_cast<std::uint64_t>(k));
    const EnergyMoments m =
        energy_moments_exact(net, lat, cpl, sector, E3Mode::exact);
    const auto h = sector_matrix(lat, cpl, sector);
    const MatrixMoments ref = matrix_moments(h, psi_vector(net, sector));
    worst = std::max({worst, rel_err(m.e1, ref.e1, 1e-300),
                      rel_err(m.e2, ref.e2, 1e-300),
                      rel_err(m.e3, ref.e3, 1e-300)});
    if (m.sigma2 < 0) {
      res.detail = "negative energy variance " + fmtg(m.sigma2);
      return res;
    }
  }
  res.passed = worst <= 1e-9;
  res.detail = "worst relative moment error " + fmtg(worst) + " (tol 1e-9)";
  return res;
}

CheckResult check_gradients_fd() {
  CheckResult res{2, "gradient-finite-difference", false, ""};
  const Lattice lat = build_lattice(4);
  const SectorIndex sector = enumerate_sector(16, 8);
  // Five-point central difference: the h^2 term cancels, leaving h^4
  // truncation plus roundoff ~ eps/h.  At h = 1e-3 both sit orders of
  // magnitude below the 1e-6 target even for components near the
  // comparison floor; a plain two-point stencil cannot reach that on
  // components much smaller than the gradient's largest entry.
  const double h = 1e-3;
  double worst = 0;
  for (int k = 0; k < 10; ++k) {
    const Couplings cpl{1.0, kJ2Cycle[k % 5]};
    const Architecture arch = small_arch(8 + 4 * (k % 3), 2 + (k % 2));
    NqsNetwork net(arch);
    net.init_params(2000 + static_cast<std::uint64_t>(k));
    NqsNetwork fixed(arch);
    fixed.init_params(3000 + static_cast<std::uint64_t>(k));
    const double dt = 0.02 + 0.01 * k;
    const Eigen::VectorXcd target =
        euler_target_table(fixed, lat, cpl, sector, dt);

    const Eigen::VectorXd g_ite =
        ite_loss_grad_exact(net, fixed, lat, cpl, sector, dt).grad;
    const Eigen::VectorXd g_e = e_loss_grad_exact(net, lat, cpl, sector).grad;
    const double scale_ite = 1e-3 * g_ite.cwiseAbs().maxCoeff();
    const double scale_e = 1e-3 * g_e.cwiseAbs().maxCoeff();

    CounterRng pick(4000 + static_cast<std::uint64_t>(k), 7);
    for (int j = 0; j < 20; ++j) {
      const auto idx =
          static_cast<Eigen::Index>(pick.next_below(net.n_params()));
      const double save = net.params()[idx];

      double loss_at[4];
      double energy_at[4];
      const double offsets[4] = {-2.0 * h, -h, h, 2.0 * h};
      for (int q = 0; q < 4; ++q) {
        net.params()[idx] = save + offsets[q];
        loss_at[q] = ite_loss_exact(net, sector, target);
        energy_at[q] = exact_energy(net, lat, cpl, sector);
      }
      net.params()[idx] = save;

      const double fd_ite =
          (loss_at[0] - 8.0 * loss_at[1] + 8.0 * loss_at[2] - loss_at[3]) /
          (12.0 * h);
      const double fd_e = (energy_at[0] - 8.0 * energy_at[1] +
                           8.0 * energy_at[2] - energy_at[3]) /
                          (12.0 * h);
      worst = std::max({worst, rel_err(g_ite[idx], fd_ite, scale_ite),
                        rel_err(g_e[idx], fd_e, scale_e)});
    }
  }
  res.passed = worst <= 1e-6;
  res.detail = "worst relative gradient error " + fmtg(worst) + " (tol 1e-6)";
  return res;
}

CheckResult check_loss_equivalence() {
  CheckResult res{3, "loss-equivalence", false, ""};
  const Lattice lat = build_lattice(4);
  const SectorIndex sector = enumerate_sector(16, 8);
  double worst = 0;
  for (int k = 0; k < 5; ++k) {
    const Couplings cpl{1.0, kJ2Cycle[k]};
    NqsNetwork net(small_arch(12, 2));
    net.init_params(5000 + static_cast<std::uint64_t>(k));
    const double energy = exact_energy(net, lat, cpl, sector);
    const Eigen::VectorXd g_e = e_loss_grad_exact(net, lat, cpl, sector).grad;
    for (const double dt : {0.05, 0.17}) {
      // With the frozen copy equal to the live network, the overlap-loss
      // gradient must be the energy-loss gradient scaled by
      // dt / (1 - dt <E>).
      const Eigen::VectorXd g_ite =
          ite_loss_grad_exact(net, net, lat, cpl, sector, dt).grad;
      const double c = dt / (1.0 - dt * energy);
      const double floor_scale = 1e-2 * g_ite.cwiseAbs().maxCoeff();
      for (Eigen::Index i = 0; i < g_ite.size(); ++i) {
        const double a = g_ite[i];
        const double b = c * g_e[i];
        worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a),
                                                            std::abs(b),
                                                            floor_scale}));
      }
    }
  }
  res.passed = worst <= 1e-10;
  res.detail = "worst elementwise deviation " + fmtg(worst) + " (tol 1e-10)";
  return res;
}

CheckResult check_time_step() {
  CheckResult res{4, "time-step-optimality", false, ""};
  const Lattice lat = build_lattice(4);
  const SectorIndex sector = enumerate_sector(16, 8);
  const auto dim = static_cast<Eigen::Index>(sector.dim());
  std::vector<Eigen::SparseMatrix<double>> mats;
  for (const double j2 : kJ2Cycle)
    mats.push_back(sector_matrix(lat, Couplings{1.0, j2}, sector));

  CounterRng rng(2026, 99);
  double worst_margin = -1e300;   // E(dt*) - best grid energy; must stay <= ~0
  double worst_offset = 0;        // |dt* - grid argmin| in units of spacing
  double worst_rq = 0;            // rational form vs Rayleigh quotient
  for (int k = 0; k < 50; ++k) {
    const auto& h = mats[static_cast<std::size_t>(k) % 5];
    const Eigen::VectorXcd psi = gaussian_state(dim, rng);
    const MatrixMoments mm = matrix_moments(h, psi);
    EnergyMoments m;
    m.e1 = mm.e1;
    m.e2 = mm.e2;
    m.e3 = mm.e3;
    m.sigma2 = mm.e2 - mm.e1 * mm.e1;
    m.n_samples = static_cast<std::size_t>(dim);
    m.e3_mode = E3Mode::exact;

    const TimeStepSolve solve = optimal_time_step(m, 1e-12);
    if (solve.status != TimeStepStatus::ok) {
      res.detail = "state " + std::to_string(k) + ": solve status not ok";
      return res;
    }
    const double sigma = std::sqrt(m.sigma2);
    const double spacing = (2.0 / sigma) / 1e4;
    double best_e = 1e300;
    double best_dt = 0;
    for (int i = 1; i <= 10000; ++i) {
      const double dt = spacing * i;
      const double e = target_energy(m, dt);
      if (e < best_e) {
        best_e = e;
        best_dt = dt;
      }
    }
    worst_margin = std::max(
        worst_margin,
        (solve.target_energy - best_e) / std::max(1.0, std::abs(best_e)));
    worst_offset =
        std::max(worst_offset, std::abs(solve.delta_tau - best_dt) / spacing);

    const Eigen::VectorXcd hp = apply_sparse(h, psi);
    const Eigen::VectorXcd phi = psi - solve.delta_tau * hp;
    const Eigen::VectorXcd hphi = apply_sparse(h, phi);
    const double rq = phi.dot(hphi).real() / phi.squaredNorm();
    worst_rq = std::max(worst_rq, std::abs(solve.target_energy - rq) /
                                      std::max(1.0, std::abs(rq)));
  }
  res.passed =
      worst_margin <= 1e-12 && worst_offset <= 1.0 + 1e-9 && worst_rq <= 1e-10;
  res.detail = "grid margin " + fmtg(worst_margin) + ", argmin offset " +
               fmtg(worst_offset) + " spacings, Rayleigh mismatch " +
               fmtg(worst_rq) + " (tols 1e-12 / 1 / 1e-10)";
  return res;
}

CheckResult check_sampler_fidelity() {
  CheckResult res{5, "sampler-fidelity", false, ""};
  const Lattice lat = build_lattice(4);
  const SectorIndex sector = enumerate_sector(16, 8);

  // A network with all parameters zero is constant over the sector, so
  // every proposal must be accepted.
  NqsNetwork flat(small_arch(8, 2));
  WalkerEnsemble ens0 = init_ensemble(64, 16, 8, 11);
  metropolis_sweeps(flat, lat, ens0, 500);
  if (ens0.acceptance_rate() != 1.0) {
    res.detail = "uniform-state acceptance " + fmtg(ens0.acceptance_rate()) +
                 " != 1";
    return res;
  }

  // Sharpening the random net concentrates |psi|^2 so the per-bin counting
  // noise floor sits well under the tolerance; eight decorrelation sweeps
  // keep the chain-autocorrelation inflation modest (measured ~2.4x iid).
  NqsNetwork net(small_arch(16, 2));
  net.init_params(2718);
  net.params() *= 2.0;
  const std::vector<double> weights = exact_weights(net, sector);

  WalkerEnsemble ens = init_ensemble(256, 16, 8, 314159);
  warmup(net, lat, ens, 320);
  const std::size_t n_target = 1000000;
  std::vector<std::uint64_t> counts(sector.dim(), 0);
  std::size_t collected = 0;
  while (collected < n_target) {
    const auto batch = sample_batch(net, lat, ens, 8);
    for (const auto& cfg : batch) {
      if (collected == n_target) break;
      ++counts[sector.ordinal(cfg)];
      ++collected;
    }
  }
  double tv = 0;
  for (std::size_t k = 0; k < counts.size(); ++k)
    tv += std::abs(static_cast<double>(counts[k]) / static_cast<double>(n_target) -
                   weights[k]);
  tv *= 0.5;
  res.passed = tv <= 0.02;
  res.detail = "total variation " + fmtg(tv) +
               " over 1e6 samples (tol 0.02); uniform acceptance exact";
  return res;
}

namespace {

RunConfig recovery_config(RunMode mode, LossKind loss, std::uint64_t seed) {
  RunConfig cfg;
  cfg.d_lat = 4;
  cfg.j1 = 1.0;
  cfg.j2_over_j1 = 0.5;
  cfg.d_p = 2;
  cfg.d_enc = 8;
  cfg.width = 64;
  cfg.depth = 2;
  cfg.mode = mode;
  cfg.loss = loss;
  cfg.seed = seed;
  cfg.alpha0 = 1e-3;
  cfg.alpha_f = 1e-5;
  cfg.max_steps_per_epoch = 1000;
  if (mode == RunMode::exact_sum) {
    cfg.total_steps = 12000;
  } else {
    cfg.total_steps = 16000;
    cfg.n_walkers = 256;
    cfg.n_skip = 4;
    cfg.n_warmup = -1;
    cfg.n_energy_samples = 20000;
    cfg.n_final_samples = 200000;
  }
  return cfg;
}

}  // namespace

CheckResult check_ground_state() {
  CheckResult res{6, "ground-state-recovery", false, ""};
  const Lattice lat = build_lattice(4);
  const SectorIndex sector = enumerate_sector(16, 8);
  const Couplings cpl{1.0, 0.5};
  const EdResult ed = ground_state(lat, cpl, sector);

  const RunConfig ce = recovery_config(RunMode::exact_sum, LossKind::ite, 42);
  const RunLog le = train(ce);
  const double rel_exact =
      std::abs(le.summary.final_energy - ed.e0) / std::abs(ed.e0);

  const RunConfig cm = recovery_config(RunMode::mcmc, LossKind::ite, 42);
  const RunLog lm = train(cm);
  const double rel_mcmc =
      std::abs(lm.summary.final_energy - ed.e0) / std::abs(ed.e0);

  res.passed = rel_exact <= 1e-3 && rel_mcmc <= 5e-3;
  res.detail = "relative error exact-sum " + fmtg(rel_exact) +
               " (tol 1e-3), sampled " + fmtg(rel_mcmc) + " (tol 5e-3)";
  return res;
}

CheckResult check_loss_stability() {
  CheckResult res{7, "loss-stability", false, ""};
  const std::uint64_t seeds[3] = {101, 102, 103};

  auto stability_config = [](LossKind loss, std::uint64_t seed) {
    RunConfig cfg;
    cfg.d_lat = 4;
    cfg.j2_over_j1 = 0.5;
    cfg.d_enc = 8;
    cfg.width = 32;
    cfg.depth = 2;
    cfg.mode = RunMode::mcmc;
    cfg.loss = loss;
    cfg.seed = seed;
    cfg.total_steps = 4000;
    cfg.n_energy_samples = 10000;
    cfg.n_final_samples = 100000;
    cfg.max_steps_per_epoch = 1000;
    return cfg;
  };

  std::vector<double> finals_ite, finals_e;
  double worst_jump = -1e300;
  for (const auto seed : seeds) {
    const RunLog log = train(stability_config(LossKind::ite, seed));
    finals_ite.push_back(log.summary.final_energy);
    for (std::size_t k = 0; k + 1 < log.epochs.size(); ++k) {
      const auto& a = log.epochs[k];
      const auto& b = log.epochs[k + 1];
      worst_jump = std::max(worst_jump, (b.e1 - a.e1) - 2.0 * a.sigma_e);
    }
  }
  for (const auto seed : seeds)
    finals_e.push_back(
        train(stability_config(LossKind::e_loss, seed)).summary.final_energy);

  const double std_ite = sample_std(finals_ite);
  const double std_e = sample_std(finals_e);
  const bool no_jumps = worst_jump <= 0.0;
  res.passed = std_ite <= std_e && no_jumps;
  res.detail = "final-energy spread " + fmtg(std_ite) + " (overlap loss) vs " +
               fmtg(std_e) + " (energy loss); worst boundary rise minus "
               "2 sigma_E = " + fmtg(worst_jump);
  return res;
}

CheckResult check_determinism(const std::string& cli_path) {
  CheckResult res{8, "determinism", false, ""};
  if (cli_path.empty()) {
    res.detail = "runner binary path not provided";
    return res;
  }
  namespace fs = std::filesystem;
  const fs::path base =
      fs::temp_directory_path() /
      ("nqsite_det_" + std::to_string(static_cast<unsigned>(::getpid())));
  fs::remove_all(base);
  fs::create_directories(base);

  const fs::path cfg_path = base / "run.cfg";
  {
    std::ofstream cfg(cfg_path);
    cfg << "[lattice]\nd_lat = 4\nj2_over_j1 = 0.5\n\n"
        << "[model]\nwidth = 16\ndepth = 2\nd_enc = 4\n\n"
        << "[sampler]\nn_walkers = 64\n\n"
        << "[train]\ntotal_steps = 60\nn_energy_samples = 2000\n"
        << "n_final_samples = 4000\nmax_steps_per_epoch = 25\n\n"
        << "[run]\nseed = 7\nmode = mcmc\ned_reference = off\n";
  }

  auto run = [&](const std::string& out_dir, int threads) {
    std::ostringstream cmd;
    cmd << '"' << cli_path << '"' << " train --config " << cfg_path
        << " --out " << (base / out_dir) << " --threads " << threads
        << " > " << (base / (out_dir + ".log")) << " 2>&1";
    return std::system(cmd.str().c_str());
  };
  if (run("a", 1) != 0 || run("b", 1) != 0 || run("c", 8) != 0) {
    res.detail = "runner invocation failed";
    fs::remove_all(base);
    return res;
  }

  bool same = true;
  std::string first_diff;
  for (const char* name : {"steps.csv", "epochs.csv", "summary.json",
                           "config.txt"}) {
    const std::string a = read_file(base / "a" / name);
    if (a != read_file(base / "b" / name)) {
      same = false;
      first_diff = std::string(name) + " differs across identical reruns";
      break;
    }
    if (a != read_file(base / "c" / name)) {
      same = false;
      first_diff = std::string(name) + " differs across thread counts 1 vs 8";
      break;
    }
  }
  fs::remove_all(base);
  res.passed = same;
  res.detail = same ? "logs byte-identical across reruns and threads {1,8}"
                    : first_diff;
  return res;
}

CheckResult check_monotonic_descent() {
  CheckResult res{9, "monotonic-descent", false, ""};
  RunConfig cfg;
  cfg.d_lat = 4;
  cfg.j2_over_j1 = 0.5;
  cfg.d_enc = 8;
  cfg.width = 32;
  cfg.depth = 2;
  cfg.mode = RunMode::exact_sum;
  cfg.loss = LossKind::ite;
  cfg.seed = 9;
  cfg.total_steps = 2500;
  cfg.max_steps_per_epoch = 400;

  const Lattice lat = build_lattice(4);
  const SectorIndex sector = enumerate_sector(16, 8);
  const EdResult ed = ground_state(lat, cfg.couplings(), sector);
  const double floor = ed.e0 - 1e-9;

  const RunLog log = train(cfg);
  if (log.epochs.size() < 3) {
    res.detail = "only " + std::to_string(log.epochs.size()) +
                 " epochs; descent sequence too short to judge";
    return res;
  }
  bool monotone = true;
  for (std::size_t k = 0; k + 1 < log.epochs.size(); ++k) {
    const auto& a = log.epochs[k];
    const auto& b = log.epochs[k + 1];
    if (!a.stalled && !a.degenerate && !(b.e1 < a.e1)) {
      monotone = false;
      break;
    }
  }
  double min_energy = log.summary.final_energy;
  for (const auto& r : log.steps) min_energy = std::min(min_energy, r.energy);
  for (const auto& r : log.epochs) min_energy = std::min(min_energy, r.e1);
  const bool variational = min_energy >= floor;
  res.passed = monotone && variational;
  res.detail = std::string(monotone ? "epoch energies strictly decrease"
                                    : "epoch energy sequence not decreasing") +
               "; lowest reported energy " + fmtg(min_energy) + " vs bound " +
               fmtg(floor) + " (" + std::to_string(log.epochs.size()) +
               " epochs, " + std::to_string(log.summary.steps_run) + " steps)";
  return res;
}

CheckResult run_criterion(int number, const std::string& cli_path) {
  switch (number) {
    case 1: return check_moment_identities();
    case 2: return check_gradients_fd();
    case 3: return check_loss_equivalence();
    case 4: return check_time_step();
    case 5: return check_sampler_fidelity();
    case 6: return check_ground_state();
    case 7: return check_loss_stability();
    case 8: return check_determinism(cli_path);
    case 9: return check_monotonic_descent();
    default: throw std::invalid_argument("criterion number must be 1..9");
  }
}

std::vector<CheckResult> run_all_criteria(const std::string& cli_path) {
  std::vector<CheckResult> out;
  for (int k = 1; k <= 9; ++k) out.push_back(run_criterion(k, cli_path));
  return out;
}

std::string format_result(const CheckResult& r) {
  std::ostringstream os;
  os << "criterion " << r.criterion << " (" << r.name << "): "
     << (r.passed ? "PASS" : "FAIL") << " - " << r.detail;
  return os.str();
}

}  // namespace nqsite
