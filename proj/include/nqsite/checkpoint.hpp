#pragma once

#include <string>

#include "nqsite/config.hpp"
#include "nqsite/ite_trainer.hpp"

namespace nqsite {

// Binary snapshot of a training run: magic + version, the canonical config
// text, the architecture, both parameter vectors, the Adam moments, the
// epoch bookkeeping, every walker with its RNG counter, and a CRC32 over
// the payload.  Loading restores training bit-for-bit: continuing a
// checkpointed run reproduces the uninterrupted run exactly.
void save_checkpoint(const std::string& path, const RunConfig& cfg,
                     const TrainState& st);

// Throws std::runtime_error on unreadable files, bad magic, unsupported
// version, truncation, checksum mismatch, or a state incompatible with
// `cfg` (architecture, mode, loss, seed, walker count).
TrainState load_checkpoint(const std::string& path, const RunConfig& cfg);

}  // namespace nqsite
