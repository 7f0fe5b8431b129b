#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "nqsite/checkpoint.hpp"
#include "nqsite/config.hpp"
#include "nqsite/ed_oracle.hpp"
#include "nqsite/hilbert.hpp"
#include "nqsite/ite_trainer.hpp"
#include "nqsite/lattice.hpp"
#include "nqsite/run_log.hpp"
#include "nqsite/verification.hpp"

namespace {

using namespace nqsite;

void apply_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("NQS_THREADS")) threads = std::atoi(env);
  }
  if (threads > 0) omp_set_num_threads(threads);
}

std::string fmtg(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", x);
  return buf;
}

void attach_ed_reference(RunLog& log, const RunConfig& cfg) {
  const int n_sites = cfg.d_lat * cfg.d_lat;
  const bool feasible = n_sites <= 32;
  if (cfg.ed_reference == "off") return;
  if (cfg.ed_reference == "auto" && !feasible) return;
  if (!feasible)
    throw std::runtime_error(
        "ed_reference = on requires d_lat^2 <= 32 sites; use 'off' or 'auto'");
  const Lattice lat = build_lattice(cfg.d_lat);
  const SectorIndex sector = enumerate_sector(n_sites, n_sites / 2);
  const EdResult ed = ground_state(lat, cfg.couplings(), sector);
  log.summary.ed_energy = ed.e0;
  log.summary.ed_residual = ed.residual;
  log.summary.rel_error =
      std::abs(log.summary.final_energy - ed.e0) / std::abs(ed.e0);
  log.summary.error_per_site =
      std::abs(log.summary.final_energy - ed.e0) / n_sites;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed,
              const std::string& mode_override) {
  RunConfig cfg = parse_config_file(config_path);
  if (seed) cfg.seed = *seed;
  if (!mode_override.empty()) {
    cfg.mode = mode_override == "exact" ? RunMode::exact_sum : RunMode::mcmc;
    validate_config(cfg);
  }

  std::filesystem::create_directories(out_dir);
  const std::string ckpt_path =
      (std::filesystem::path(out_dir) / "checkpoint.bin").string();
  TrainState st(cfg);
  TrainHooks hooks;
  if (cfg.checkpoint_every > 0) {
    hooks.on_step = [&](const StepRecord& rec, const TrainState& state) {
      if ((rec.step + 1) % cfg.checkpoint_every == 0)
        save_checkpoint(ckpt_path, cfg, state);
    };
  }

  const auto t0 = std::chrono::steady_clock::now();
  RunLog log = train(cfg, st, hooks);
  const double wall_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  attach_ed_reference(log, cfg);
  write_run_artifacts(log, cfg, out_dir);
  save_checkpoint(ckpt_path, cfg, st);

  std::cout << "steps run        " << log.summary.steps_run << "\n"
            << "epochs           " << log.summary.epochs << "\n"
            << "final energy     " << fmtg(log.summary.final_energy) << " +- "
            << fmtg(log.summary.final_sigma_e) << "\n"
            << "energy per site  " << fmtg(log.summary.final_energy_per_site)
            << "\n";
  if (log.summary.ed_energy) {
    std::cout << "ed energy        " << fmtg(*log.summary.ed_energy) << "\n"
              << "relative error   " << fmtg(*log.summary.rel_error) << "\n"
              << "error per site   " << fmtg(*log.summary.error_per_site)
              << "\n";
  }
  std::cout << "wall seconds     " << fmtg(wall_s) << "\n"
            << "artifacts        " << out_dir << "\n";
  return 0;
}

int cmd_ed(int d_lat, double j1, double j2_over_j1, int n_up,
           std::uint64_t seed) {
  const Lattice lat = build_lattice(d_lat);
  if (lat.n_sites > 32)
    throw std::runtime_error("ed requires d_lat^2 <= 32 sites");
  if (n_up < 0) n_up = lat.n_sites / 2;
  const SectorIndex sector = enumerate_sector(lat.n_sites, n_up);
  const Couplings cpl{j1, j1 * j2_over_j1};
  const EdResult ed = ground_state(lat, cpl, sector, 1e-10, 600, seed);

  nlohmann::ordered_json j;
  j["d_lat"] = d_lat;
  j["j1"] = j1;
  j["j2_over_j1"] = j2_over_j1;
  j["n_up"] = n_up;
  j["dim"] = sector.dim();
  j["e0"] = ed.e0;
  j["e0_per_site"] = ed.e0 / lat.n_sites;
  j["residual"] = ed.residual;
  j["iterations"] = ed.iterations;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_verify(std::vector<int> criteria, std::string cli_path,
               const char* self) {
  if (cli_path.empty()) {
    if (const char* env = std::getenv("NQSITE_CLI")) cli_path = env;
  }
  if (cli_path.empty()) cli_path = self;
  if (criteria.empty())
    for (int k = 1; k <= 9; ++k) criteria.push_back(k);

  bool all_ok = true;
  for (const int k : criteria) {
    const CheckResult r = run_criterion(k, cli_path);
    std::cout << format_result(r) << std::endl;
    all_ok = all_ok && r.passed;
  }
  return all_ok ? 0 : 1;
}

int cmd_compare_loss(const std::string& config_path,
                     std::vector<std::uint64_t> seeds,
                     const std::string& out_dir) {
  if (seeds.empty()) seeds = {101, 102, 103};
  const RunConfig base = parse_config_file(config_path);

  std::ostringstream csv;
  csv << "loss,seed,final_energy,final_sigma_e\n";
  std::vector<double> finals_ite, finals_e;
  for (const LossKind loss : {LossKind::ite, LossKind::e_loss}) {
    for (const auto seed : seeds) {
      RunConfig cfg = base;
      cfg.loss = loss;
      cfg.seed = seed;
      const RunLog log = train(cfg);
      (loss == LossKind::ite ? finals_ite : finals_e)
          .push_back(log.summary.final_energy);
      csv << to_string(loss) << ',' << seed << ','
          << fmtg(log.summary.final_energy) << ','
          << fmtg(log.summary.final_sigma_e) << '\n';
      std::cout << to_string(loss) << " seed " << seed << ": E = "
                << fmtg(log.summary.final_energy) << " +- "
                << fmtg(log.summary.final_sigma_e) << std::endl;
    }
  }

  auto spread = [](const std::vector<double>& xs) {
    double mean = 0;
    for (const double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0;
    for (const double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
  };
  const double s_ite = spread(finals_ite);
  const double s_e = spread(finals_e);
  std::cout << "seed spread: overlap loss " << fmtg(s_ite) << ", energy loss "
            << fmtg(s_e) << " -> overlap loss "
            << (s_ite <= s_e ? "tighter or equal" : "wider") << "\n";

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(std::filesystem::path(out_dir) / "compare_loss.csv");
    out << csv.str();
    std::cout << "table written to " << out_dir << "/compare_loss.csv\n";
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, std::vector<double> values,
              const std::string& out_dir) {
  if (values.empty()) values = {0.4, 0.45, 0.5, 0.55, 0.6};
  const RunConfig base = parse_config_file(config_path);

  std::ostringstream csv;
  csv << "j2_over_j1,final_energy,final_energy_per_site,final_sigma_e,"
         "ed_energy,rel_error,error_per_site\n";
  double worst_err = -1, worst_ratio = 0;
  bool have_errors = false;
  for (const double v : values) {
    RunConfig cfg = base;
    cfg.j2_over_j1 = v;
    RunLog log = train(cfg);
    attach_ed_reference(log, cfg);
    csv << fmtg(v) << ',' << fmtg(log.summary.final_energy) << ','
        << fmtg(log.summary.final_energy_per_site) << ','
        << fmtg(log.summary.final_sigma_e) << ',';
    if (log.summary.ed_energy) {
      have_errors = true;
      csv << fmtg(*log.summary.ed_energy) << ',' << fmtg(*log.summary.rel_error)
          << ',' << fmtg(*log.summary.error_per_site);
      if (*log.summary.rel_error > worst_err) {
        worst_err = *log.summary.rel_error;
        worst_ratio = v;
      }
    } else {
      csv << ",,";
    }
    csv << '\n';
    std::cout << "j2/j1 = " << fmtg(v)
              << ": E = " << fmtg(log.summary.final_energy)
              << (log.summary.rel_error
                      ? " (rel err " + fmtg(*log.summary.rel_error) + ")"
                      : "")
              << std::endl;
  }
  std::cout << csv.str();
  if (have_errors) {
    // The frustrated point is the hard one; flag it if the sweep disagrees.
    double mid = values[values.size() / 2];
    for (const double v : values)
      if (std::abs(v - 0.5) < std::abs(mid - 0.5)) mid = v;
    if (std::abs(worst_ratio - mid) > 1e-12)
      std::cerr << "note: largest error at j2/j1 = " << fmtg(worst_ratio)
                << ", not at the most frustrated ratio " << fmtg(mid) << "\n";
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(std::filesystem::path(out_dir) / "sweep.csv");
    out << csv.str();
    std::cout << "table written to " << out_dir << "/sweep.csv\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-network quantum state ground-state solver for the "
               "J1-J2 Heisenberg model"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads,
                 "OpenMP thread count (or env NQS_THREADS)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a network");
  std::string config_path, out_dir = "run_out", mode_override;
  std::optional<std::uint64_t> seed_override;
  train_cmd->add_option("--config", config_path, "Config file (text or JSON)")
      ->required();
  train_cmd->add_option("--out", out_dir, "Artifact directory");
  train_cmd->add_option("--seed", seed_override, "Override the config seed");
  train_cmd->add_option("--mode", mode_override, "Override run mode")
      ->check(CLI::IsMember({"mcmc", "exact"}));

  // ed
  auto* ed_cmd = app.add_subcommand("ed", "Exact ground state of one sector");
  int d_lat = 4, n_up = -1;
  double j1 = 1.0, j2_over_j1 = 0.5;
  std::uint64_t ed_seed = 1;
  ed_cmd->add_option("--d-lat", d_lat, "Lattice side length");
  ed_cmd->add_option("--j1", j1, "Nearest-neighbor coupling");
  ed_cmd->add_option("--j2-over-j1", j2_over_j1, "Frustration ratio");
  ed_cmd->add_option("--n-up", n_up, "Up-spin count (default: half filling)");
  ed_cmd->add_option("--seed", ed_seed, "Start-vector seed");

  // verify
  auto* verify_cmd =
      app.add_subcommand("verify", "Run the verification criteria");
  std::vector<int> criteria;
  std::string cli_path;
  verify_cmd->add_option("--criterion", criteria, "Criterion numbers (1-9)")
      ->check(CLI::Range(1, 9));
  verify_cmd->add_option("--cli", cli_path,
                         "Runner binary for the determinism check");

  // compare-loss
  auto* cmp_cmd = app.add_subcommand(
      "compare-loss", "Paired multi-seed runs of both training losses");
  std::string cmp_config, cmp_out;
  std::vector<std::uint64_t> cmp_seeds;
  cmp_cmd->add_option("--config", cmp_config, "Base config")->required();
  cmp_cmd->add_option("--seeds", cmp_seeds, "Seeds (default 101 102 103)");
  cmp_cmd->add_option("--out", cmp_out, "Directory for compare_loss.csv");

  // sweep
  auto* sweep_cmd =
      app.add_subcommand("sweep", "Train across a frustration-ratio grid");
  std::string sweep_config, sweep_out;
  std::vector<double> sweep_values;
  sweep_cmd->add_option("--config", sweep_config, "Base config")->required();
  sweep_cmd->add_option("--values", sweep_values,
                        "j2/j1 values (default 0.4 0.45 0.5 0.55 0.6)");
  sweep_cmd->add_option("--out", sweep_out, "Directory for sweep.csv");

  CLI11_PARSE(app, argc, argv);
  apply_threads(threads);

  try {
    if (train_cmd->parsed())
      return cmd_train(config_path, out_dir, seed_override, mode_override);
    if (ed_cmd->parsed()) return cmd_ed(d_lat, j1, j2_over_j1, n_up, ed_seed);
    if (verify_cmd->parsed()) return cmd_verify(criteria, cli_path, argv[0]);
    if (cmp_cmd->parsed()) return cmd_compare_loss(cmp_config, cmp_seeds, cmp_out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_config, sweep_values, sweep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
