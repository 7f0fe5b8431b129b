#pragma once

#include <cstdint>
#include <string>

#include "nqsite/estimators.hpp"
#include "nqsite/nqs_model.hpp"

namespace nqsite {

enum class RunMode { mcmc, exact_sum };
enum class LossKind { ite, e_loss };

std::string to_string(RunMode m);
std::string to_string(LossKind k);

// Full description of one run.  Defaults reproduce the reference training
// setup: 256 walkers, skip 4, warmup 10 * d_lat^2, learning rate decaying
// geometrically from 1e-3 to 1e-5, 1e5 statistics samples, 1e6 final
// samples, 5e5 total steps, 2x2 patches embedded into 8 features.
struct RunConfig {
  // lattice / couplings
  int d_lat = 6;
  double j1 = 1.0;
  double j2_over_j1 = 0.5;

  // model
  int d_p = 2;
  int d_enc = 8;
  int width = 512;
  int depth = 4;
  double a_sat = 20.0;
  Activation activation = Activation::gelu;

  // sampler
  int n_walkers = 256;
  int n_skip = 4;
  std::int64_t n_warmup = -1;  // -1: auto (10 * d_lat^2)

  // training
  std::uint64_t total_steps = 500000;
  double alpha0 = 1e-3;
  double alpha_f = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t n_energy_samples = 100000;
  std::uint64_t n_final_samples = 1000000;
  double ema_decay = 0.99;
  LossKind loss = LossKind::ite;
  E3Mode e3_mode = E3Mode::approximate;
  std::uint64_t max_steps_per_epoch = 1000;
  double degeneracy_tol = 1e-12;
  bool blocked_se = false;
  std::uint64_t checkpoint_every = 0;  // 0: only at the end of the run

  // run
  RunMode mode = RunMode::mcmc;
  std::uint64_t seed = 1;
  std::string ed_reference = "auto";  // auto | on | off

  Couplings couplings() const { return {j1, j1 * j2_over_j1}; }
  std::int64_t resolved_warmup() const {
    return n_warmup >= 0 ? n_warmup : 10LL * d_lat * d_lat;
  }
  Architecture architecture() const {
    return {d_lat, d_p, d_enc, width, depth, a_sat, activation};
  }
};

// Reads either the sectioned key = value format or JSON (detected from the
// file content).  Unknown sections/keys and malformed values are reported
// with file/line context; all invariants of the resolved configuration are
// checked.
RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text,
                            const std::string& origin = "<config>");

// Fully resolved, sorted key = value form; identical configurations yield
// identical text on every platform.
std::string canonical_config(const RunConfig& cfg);

// FNV-1a over the canonical text, as a fixed-width hex string.
std::string config_hash(const RunConfig& cfg);

void validate_config(const RunConfig& cfg);

}  // namespace nqsite
