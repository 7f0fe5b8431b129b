#include "nqsite/run_log.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nqsite/config.hpp"

namespace nqsite {
namespace {

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

}  // namespace

std::string steps_csv(const std::vector<StepRecord>& steps) {
  std::ostringstream os;
  os << "step,epoch,lr,delta_tau,ema_energy,loss,acceptance\n";
  for (const auto& r : steps) {
    os << r.step << ',' << r.epoch << ',' << fmt17(r.lr) << ',' << fmt17(r.delta_tau)
       << ',' << fmt17(r.energy) << ',' << fmt17(r.loss) << ','
       << fmt17(r.acceptance) << '\n';
  }
  return os.str();
}

std::string epochs_csv(const std::vector<EpochRecord>& epochs) {
  std::ostringstream os;
  os << "epoch,delta_tau,e1,sigma_e,e2,e3,e_threshold,steps_in_epoch,"
        "start_step,sigma2,target_energy,stalled,degenerate\n";
  for (const auto& r : epochs) {
    os << r.epoch << ',' << fmt17(r.delta_tau) << ',' << fmt17(r.e1) << ','
       << fmt17(r.sigma_e) << ',' << fmt17(r.e2) << ',' << fmt17(r.e3) << ','
       << fmt17(r.e_threshold) << ',' << r.steps << ',' << r.start_step << ','
       << fmt17(r.sigma2) << ',' << fmt17(r.target_energy) << ','
       << (r.stalled ? 1 : 0) << ',' << (r.degenerate ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string summary_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["steps_run"] = s.steps_run;
  j["epochs"] = s.epochs;
  j["final_energy"] = s.final_energy;
  j["final_energy_per_site"] = s.final_energy_per_site;
  j["final_sigma_e"] = s.final_sigma_e;
  j["converged_degenerate"] = s.converged_degenerate;
  if (s.ed_energy) {
    j["ed_energy"] = *s.ed_energy;
    j["ed_residual"] = *s.ed_residual;
    j["rel_error"] = *s.rel_error;
    j["error_per_site"] = *s.error_per_site;
  }
  j["config_hash"] = s.config_hash;
  j["seed"] = s.seed;
  j["mode"] = s.mode;
  j["loss"] = s.loss;
  return j.dump(2) + "\n";
}

void write_run_artifacts(const RunLog& log, const RunConfig& cfg,
                         const std::string& dir) {
  const std::filesystem::path base(dir);
  std::filesystem::create_directories(base);
  write_file(base / "steps.csv", steps_csv(log.steps));
  write_file(base / "epochs.csv", epochs_csv(log.epochs));
  write_file(base / "summary.json", summary_json(log.summary));
  write_file(base / "config.txt", canonical_config(cfg));

  std::ostringstream timing;
  timing << "step,wall_ms\n";
  double total = 0;
  for (std::size_t i = 0; i < log.step_wall_ms.size(); ++i) {
    timing << i << ',' << fmt17(log.step_wall_ms[i]) << '\n';
    total += log.step_wall_ms[i];
  }
  timing << "total," << fmt17(total) << '\n';
  write_file(base / "timing.csv", timing.str());
}

}  // namespace nqsite
