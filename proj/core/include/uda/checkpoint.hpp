#ifndef UDA_CHECKPOINT_HPP
#define UDA_CHECKPOINT_HPP

#include <string>

#include "uda/trainer.hpp"

namespace uda {

// Binary snapshot of the full training state: weights, optimizer moments,
// prototypes, RNG and batch-stream positions, and both histories. A run
// resumed from a checkpoint continues bit-for-bit as if uninterrupted.
void save_checkpoint(const TrainState& state, const std::string& path);

// Self-describing: reconstructs the architecture from the file alone.
// Corrupt or truncated files raise data_error.
TrainState load_checkpoint(const std::string& path);

}  // namespace uda

#endif
