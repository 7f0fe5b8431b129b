#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nqsite {

struct RunConfig;

struct StepRecord {
  std::uint64_t step = 0;   // global step index, 0-based
  std::uint64_t epoch = 0;  // epoch the step belongs to
  double lr = 0;
  double delta_tau = 0;
  double energy = 0;      // per-step energy estimate (smoothed in MCMC mode)
  double loss = 0;        // loss value of the gradient batch
  double acceptance = 0;  // Metropolis acceptance over this step's sweeps
};

struct EpochRecord {
  std::uint64_t epoch = 0;
  std::uint64_t start_step = 0;  // global step index of the epoch's first step
  std::uint64_t steps = 0;       // descent steps taken inside the epoch
  double e1 = 0;                 // energy moments measured at the epoch start
  double e2 = 0;
  double e3 = 0;
  double sigma2 = 0;
  double sigma_e = 0;
  double delta_tau = 0;
  double e_threshold = 0;
  double target_energy = 0;  // predicted energy of the evolved state
  bool stalled = false;      // hit the per-epoch step cap
  bool degenerate = false;   // time-step solve flagged an eigenstate
};

struct RunSummary {
  std::uint64_t steps_run = 0;
  std::uint64_t epochs = 0;
  double final_energy = 0;
  double final_energy_per_site = 0;
  double final_sigma_e = 0;
  bool converged_degenerate = false;
  std::optional<double> ed_energy;          // Lanczos reference, when enabled
  std::optional<double> ed_residual;
  std::optional<double> rel_error;          // |E - E0| / |E0|
  std::optional<double> error_per_site;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string mode;
  std::string loss;
};

struct RunLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  std::vector<double> step_wall_ms;  // wall-clock; kept out of the summary
  RunSummary summary;
};

// Serialization used both for on-disk artifacts and the determinism checks.
// All values print with %.17g so equal doubles produce equal bytes.
std::string steps_csv(const std::vector<StepRecord>& steps);
std::string epochs_csv(const std::vector<EpochRecord>& epochs);
std::string summary_json(const RunSummary& summary);

// Writes steps.csv, epochs.csv, summary.json, config.txt, and timing.csv
// into `dir` (created if missing).  Everything except timing.csv is a pure
// function of the run's random seed and configuration.
void write_run_artifacts(const RunLog& log, const RunConfig& cfg,
                         const std::string& dir);

}  // namespace nqsite
