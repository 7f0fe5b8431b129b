#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nqsite/config.hpp"
#include "nqsite/ed_oracle.hpp"
#include "nqsite/estimators.hpp"
#include "nqsite/hilbert.hpp"
#include "nqsite/ite_trainer.hpp"
#include "nqsite/lattice.hpp"
#include "nqsite/run_log.hpp"

using namespace nqsite;

namespace {

RunConfig exact_config(int width, std::uint64_t steps, std::uint64_t seed) {
  RunConfig cfg;
  cfg.d_lat = 4;
  cfg.j2_over_j1 = 0.5;
  cfg.d_enc = 4;
  cfg.width = width;
  cfg.depth = 2;
  cfg.mode = RunMode::exact_sum;
  cfg.loss = LossKind::ite;
  cfg.seed = seed;
  cfg.total_steps = steps;
  cfg.max_steps_per_epoch = 20;
  return cfg;
}

RunConfig mcmc_config(std::uint64_t steps, std::uint64_t seed, LossKind loss) {
  RunConfig cfg;
  cfg.d_lat = 4;
  cfg.j2_over_j1 = 0.5;
  cfg.d_enc = 4;
  cfg.width = 12;
  cfg.depth = 2;
  cfg.mode = RunMode::mcmc;
  cfg.loss = loss;
  cfg.seed = seed;
  cfg.total_steps = steps;
  cfg.max_steps_per_epoch = 20;
  cfg.n_walkers = 64;
  cfg.n_skip = 2;
  cfg.n_warmup = 40;
  cfg.n_energy_samples = 512;
  cfg.n_final_samples = 1024;
  return cfg;
}

bool same_records(const RunLog& a, const RunLog& b) {
  if (a.steps.size() != b.steps.size()) return false;
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    const StepRecord &x = a.steps[k], &y = b.steps[k];
    if (x.step != y.step || x.epoch != y.epoch || x.lr != y.lr ||
        x.delta_tau != y.delta_tau || x.energy != y.energy ||
        x.loss != y.loss || x.acceptance != y.acceptance)
      return false;
  }
  if (a.epochs.size() != b.epochs.size()) return false;
  for (std::size_t k = 0; k < a.epochs.size(); ++k) {
    const EpochRecord &x = a.epochs[k], &y = b.epochs[k];
    if (x.e1 != y.e1 || x.e2 != y.e2 || x.e3 != y.e3 ||
        x.delta_tau != y.delta_tau || x.e_threshold != y.e_threshold ||
        x.steps != y.steps || x.stalled != y.stalled)
      return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("ite_trainer") {

TEST_CASE("learning-rate schedule decays geometrically") {
  CHECK(lr_schedule(1e-3, 1e-5, 0, 1000) == 1e-3);
  CHECK(lr_schedule(1e-3, 1e-5, 1000, 1000) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(lr_schedule(1e-3, 1e-5, 500, 1000) ==
        doctest::Approx(1e-4).epsilon(1e-12));  // geometric midpoint
  // past the end the schedule clamps at alpha_f
  CHECK(lr_schedule(1e-3, 1e-5, 5000, 1000) ==
        doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(lr_schedule(1e-3, 1e-5, 7, 0) == 1e-3);
}

TEST_CASE("adam first step has the bias-corrected closed form") {
  AdamState st = make_adam(3, 0.9, 0.999, 1e-8);
  Eigen::VectorXd p(3), g(3);
  p << 1.0, -2.0, 0.5;
  g << 0.3, -0.1, 0.0;
  const Eigen::VectorXd p0 = p;
  adam_step(st, p, g, 1e-2);
  CHECK(st.t == 1);
  for (int i = 0; i < 3; ++i) {
    // m-hat = g, v-hat = g*g, so the update is -lr * g / (|g| + eps).
    const double expect =
        p0[i] - 1e-2 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(p[i] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("adam recursion matches a hand-rolled reference over many steps") {
  AdamState st = make_adam(2, 0.9, 0.999, 1e-8);
  Eigen::VectorXd p(2);
  p << 0.2, -0.4;
  double m[2] = {0, 0}, v[2] = {0, 0};
  double q[2] = {0.2, -0.4};
  for (int t = 1; t <= 25; ++t) {
    Eigen::VectorXd g(2);
    g << std::sin(0.3 * t), std::cos(0.2 * t) - 0.5;
    adam_step(st, p, g, 3e-3);
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1.0 - std::pow(0.9, t));
      const double vh = v[i] / (1.0 - std::pow(0.999, t));
      q[i] -= 3e-3 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  CHECK(st.t == 25);
  CHECK(p[0] == doctest::Approx(q[0]).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(q[1]).epsilon(1e-12));
}

TEST_CASE("target energy is the moment-ratio rational function") {
  EnergyMoments m;
  m.e1 = -2.0;
  m.e2 = 5.5;  // sigma2 = 1.5
  m.e3 = -15.0;
  const double dt = 0.13;
  const double expect = (m.e1 - 2 * dt * m.e2 + dt * dt * m.e3) /
                        (1 - 2 * dt * m.e1 + dt * dt * m.e2);
  CHECK(target_energy(m, dt) == doctest::Approx(expect).epsilon(1e-15));

  // With sigma2 = 0 (an eigenstate) the evolved norm vanishes at
  // dt = 1/e1, which must be rejected.
  EnergyMoments eig;
  eig.e1 = 2.0;
  eig.e2 = 4.0;
  eig.e3 = 8.0;
  CHECK_THROWS_AS(target_energy(eig, 0.5), std::domain_error);
}

TEST_CASE("optimal time step filters a two-level state onto its ground level") {
  // Spectrum {-2, +3} with weights {0.7, 0.3}: the Euler factor (1 - dt H)
  // annihilates the upper level exactly at dt = 1/3, which is therefore the
  // stationary minimum, with target energy -2.
  EnergyMoments m;
  m.e1 = 0.7 * -2 + 0.3 * 3;
  m.e2 = 0.7 * 4 + 0.3 * 9;
  m.e3 = 0.7 * -8 + 0.3 * 27;
  m.sigma2 = m.e2 - m.e1 * m.e1;
  const TimeStepSolve s = optimal_time_step(m);
  REQUIRE(s.status == TimeStepStatus::ok);
  CHECK(s.delta_tau == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(s.target_energy == doctest::Approx(-2.0).epsilon(1e-12));
  // the root satisfies the stationarity quadratic
  const double A = m.e2 * m.e2 - m.e1 * m.e3;
  const double B = m.e1 * m.e2 - m.e3;
  CHECK(std::abs(A * s.delta_tau * s.delta_tau - B * s.delta_tau - m.sigma2) <
        1e-12 * std::max(1.0, m.sigma2));
  CHECK(s.target_energy ==
        doctest::Approx(target_energy(m, s.delta_tau)).epsilon(1e-12));
  // a stationary minimum: nudging dt either way cannot lower the target
  CHECK(target_energy(m, s.delta_tau * (1 + 1e-4)) >= s.target_energy);
  CHECK(target_energy(m, s.delta_tau * (1 - 1e-4)) >= s.target_energy);
}

TEST_CASE("an all-negative two-level spectrum has no finite optimum") {
  // Spectrum {-4, -1}, equal weights: (1 - dt H) keeps amplifying the lower
  // level as dt grows, so the target decreases monotonically and no
  // positive stationary point exists.
  EnergyMoments m;
  m.e1 = -2.5;
  m.e2 = 8.5;
  m.e3 = -32.5;
  m.sigma2 = m.e2 - m.e1 * m.e1;
  CHECK(optimal_time_step(m).status == TimeStepStatus::no_positive_root);
  CHECK(target_energy(m, 0.1) > target_energy(m, 0.4));
}

TEST_CASE("an eigenstate is reported as degenerate") {
  EnergyMoments m;
  m.e1 = -3.0;
  m.e2 = 9.0;
  m.e3 = -27.0;
  m.sigma2 = 0.0;
  CHECK(optimal_time_step(m).status == TimeStepStatus::degenerate);
}

TEST_CASE("exact-mode state construction and first epoch") {
  const RunConfig cfg = exact_config(8, 100, 3);
  TrainState st(cfg);
  CHECK(st.step == 0);
  CHECK(st.epoch == 0);
  CHECK_FALSE(st.in_epoch);
  CHECK(st.net.params() == st.fixed_net.params());
  REQUIRE(st.sector.has_value());
  CHECK(st.sector->dim() == 12870);

  const Lattice lat = build_lattice(4);
  begin_epoch(st, cfg);
  CHECK(st.in_epoch);
  CHECK(st.delta_tau > 0.0);
  // Exact summation: threshold sits exactly at the epoch-start energy.
  CHECK(st.e_threshold == st.pending_epoch.e1);
  const EnergyMoments m = energy_moments_exact(
      st.net, lat, cfg.couplings(), *st.sector, E3Mode::approximate);
  CHECK(st.pending_epoch.e1 == doctest::Approx(m.e1).epsilon(1e-12));
  // The frozen target is the Euler step applied to the frozen parameters.
  const Eigen::VectorXcd ref = euler_target_table(
      st.fixed_net, lat, cfg.couplings(), *st.sector, st.delta_tau);
  REQUIRE(st.target_table.size() == ref.size());
  CHECK((st.target_table - ref).cwiseAbs().maxCoeff() <
        1e-12 * ref.cwiseAbs().maxCoeff());
}

TEST_CASE("exact-mode training descends and reports exact energies") {
  RunConfig cfg = exact_config(16, 60, 4);
  const Lattice lat = build_lattice(4);
  TrainState st(cfg);
  const EnergyMoments start = energy_moments_exact(
      st.net, lat, cfg.couplings(), *st.sector, E3Mode::approximate);

  const RunLog log = train(cfg, st);
  CHECK(log.summary.steps_run == 60);
  REQUIRE(!log.steps.empty());
  CHECK(log.steps.size() == 60);
  // step ids are consecutive from zero
  for (std::size_t k = 0; k < log.steps.size(); ++k)
    CHECK(log.steps[k].step == k);
  // recorded per-step energy is the exact post-update expectation
  const EnergyMoments end = energy_moments_exact(
      st.net, lat, cfg.couplings(), *st.sector, E3Mode::approximate);
  CHECK(log.steps.back().energy == doctest::Approx(end.e1).epsilon(1e-12));
  CHECK(log.summary.final_energy == doctest::Approx(end.e1).epsilon(1e-12));
  CHECK(log.summary.final_energy < start.e1);  // descent happened
  CHECK(log.summary.final_sigma_e == 0.0);
  // variational bound with an exact expectation value
  const EdResult ed = ground_state(lat, cfg.couplings(),
                                   enumerate_sector(16, 8));
  CHECK(log.summary.final_energy >= ed.e0 - 1e-9);
  // epoch bookkeeping covers every step
  std::uint64_t covered = 0;
  for (const auto& e : log.epochs) covered += e.steps;
  CHECK(covered == 60);
  CHECK(log.summary.config_hash == config_hash(cfg));
}

TEST_CASE("interrupted in-memory training reproduces one continuous run") {
  SUBCASE("exact mode") {
    const RunConfig cfg = exact_config(8, 50, 5);
    TrainState solo(cfg);
    const RunLog full = train(cfg, solo);

    TrainState split_state(cfg);
    RunLog first = train(cfg, split_state, {}, 23);
    CHECK(first.summary.steps_run == 23);
    const RunLog second = train(cfg, split_state, {}, UINT64_MAX);
    first.steps.insert(first.steps.end(), second.steps.begin(),
                       second.steps.end());
    CHECK(solo.net.params() == split_state.net.params());
    REQUIRE(first.steps.size() == full.steps.size());
    for (std::size_t k = 0; k < full.steps.size(); ++k) {
      CHECK(first.steps[k].energy == full.steps[k].energy);
      CHECK(first.steps[k].loss == full.steps[k].loss);
      CHECK(first.steps[k].lr == full.steps[k].lr);
    }
  }

  SUBCASE("mcmc mode") {
    const RunConfig cfg = mcmc_config(50, 6, LossKind::ite);
    TrainState solo(cfg);
    const RunLog full = train(cfg, solo);

    TrainState split_state(cfg);
    train(cfg, split_state, {}, 17);
    const RunLog second = train(cfg, split_state, {}, UINT64_MAX);
    CHECK(solo.net.params() == split_state.net.params());
    CHECK(solo.ensemble.walkers.size() == split_state.ensemble.walkers.size());
    for (std::size_t w = 0; w < solo.ensemble.walkers.size(); ++w) {
      CHECK(solo.ensemble.walkers[w] == split_state.ensemble.walkers[w]);
      CHECK(solo.ensemble.rngs[w].position() ==
            split_state.ensemble.rngs[w].position());
    }
    CHECK(second.steps.back().energy == full.steps.back().energy);
  }
}

TEST_CASE("identical configs give identical runs, different seeds differ") {
  const RunConfig cfg = mcmc_config(30, 7, LossKind::ite);
  TrainState a(cfg), b(cfg);
  const RunLog la = train(cfg, a);
  const RunLog lb = train(cfg, b);
  CHECK(same_records(la, lb));
  CHECK(a.net.params() == b.net.params());

  RunConfig other = cfg;
  other.seed = 8;
  TrainState c(other);
  const RunLog lc = train(other, c);
  CHECK_FALSE(same_records(la, lc));
}

TEST_CASE("mcmc run records acceptance and positive sigma_e") {
  const RunConfig cfg = mcmc_config(40, 9, LossKind::ite);
  const RunLog log = train(cfg);
  REQUIRE(!log.steps.empty());
  for (const auto& r : log.steps) {
    CHECK(r.acceptance > 0.0);
    CHECK(r.acceptance <= 1.0);
    CHECK(std::isfinite(r.energy));
  }
  REQUIRE(!log.epochs.empty());
  for (const auto& e : log.epochs) {
    CHECK(e.sigma_e > 0.0);
    // threshold = e1 - sigma_e by construction
    CHECK(e.e_threshold == doctest::Approx(e.e1 - e.sigma_e).epsilon(1e-12));
  }
  CHECK(log.summary.mode == "mcmc");
  CHECK(log.summary.loss == "ite");
}

TEST_CASE("the frozen target changes only at epoch boundaries") {
  const RunConfig cfg = mcmc_config(60, 11, LossKind::ite);
  std::vector<std::pair<std::uint64_t, Eigen::VectorXd>> fixed_per_step;
  TrainHooks hooks;
  hooks.on_step = [&](const StepRecord& r, const TrainState& st) {
    fixed_per_step.emplace_back(r.epoch, st.fixed_net.params());
  };
  train(cfg, hooks);
  REQUIRE(fixed_per_step.size() == 60);
  int boundaries = 0;
  for (std::size_t k = 1; k < fixed_per_step.size(); ++k) {
    const bool same_epoch =
        fixed_per_step[k].first == fixed_per_step[k - 1].first;
    const bool same_params =
        std::memcmp(fixed_per_step[k].second.data(),
                    fixed_per_step[k - 1].second.data(),
                    sizeof(double) *
                        static_cast<std::size_t>(
                            fixed_per_step[k].second.size())) == 0;
    CHECK(same_params == same_epoch);
    boundaries += same_epoch ? 0 : 1;
  }
  CHECK(boundaries > 0);  // the run spans several epochs
}

TEST_CASE("energy-loss training also runs and descends on average") {
  const RunConfig cfg = mcmc_config(60, 10, LossKind::e_loss);
  const RunLog log = train(cfg);
  CHECK(log.summary.steps_run == 60);
  CHECK(log.summary.loss == "e_loss");
  REQUIRE(log.epochs.size() >= 2);
  CHECK(log.epochs.back().e1 < log.epochs.front().e1);
}

}  // TEST_SUITE
