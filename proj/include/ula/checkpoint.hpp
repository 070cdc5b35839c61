#pragma once

#include <string>

#include "ula/mlp.hpp"

namespace ula {

// Checkpoint file layout: a single-line JSON header
//   {"format":"ULCK","version":1,"layer_sizes":[...],
//    "activations":[...],"step_count":N,"param_count":P}
// terminated by '\n', followed by P little-endian float32 parameters.
// A file read back and rewritten is byte-identical.
struct Checkpoint {
  MlpModel model;
  long step_count = 0;
};

void save_checkpoint(const MlpModel& model, long step_count,
                     const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ula
