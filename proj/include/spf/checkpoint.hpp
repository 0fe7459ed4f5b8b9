#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "spf/model.hpp"

// Binary checkpoint, little-endian throughout:
//
//   magic   8 bytes  "SPFCKPT\0"
//   version u32      currently 1
//   config  u32 byte length + UTF-8 key=value text (model config, label
//                    names, training metadata under meta.*)
//   tensors u32 count, then per tensor:
//             u16 name length + UTF-8 name
//             u8 rank, u32 per dimension
//             f32 data, row-major
//   opt     u8 flag; if 1: u64 step counter, then a tensor table in the
//                    same format holding <param>.m and <param>.v moments
//
// The layout is covered by golden-file tests; load(save(x)) reproduces
// forward outputs bit-for-bit.

namespace spf {

struct CheckpointMeta {
  int epochs_completed = 0;
  int best_epoch = -1;
  double final_bce = 0.0;
  double final_recon = 0.0;
  double final_total = 0.0;
  double best_val_macro_auc = 0.0;
};

struct Checkpoint {
  ModelConfig cfg;
  ParamSet<float> params;
  std::optional<NadamState<float>> opt;
  CheckpointMeta meta;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds layouts from the stored config and adopts the stored tensors.
Model<float> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace spf
