#pragma once

#include <filesystem>
#include <string>

#include "vpe/model.hpp"

// Checkpoint container, little endian:
//   magic "VPEC", format version u32, length-prefixed config text,
//   then parameter records (u32 name length, name, u32 rank, u64 extents,
//   raw 32-bit floats), then optimizer state in the same record format.
// Batch-norm running statistics travel with the parameter block; the training
// iteration, Adam hyperparameters/step count and RNG stream states live in
// the config text.

namespace vpe {

struct CheckpointMeta {
  std::uint64_t train_iteration = 0;
  std::uint64_t seed = 0;
  std::string rng_sampling_state;
  std::string rng_augment_state;
  std::string rng_noise_state;
};

void save_checkpoint(const std::filesystem::path& path, VpeModelF& model,
                     const AdamState<float>& adam, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  VpeConfig config;
  VpeModelF model;
  AdamState<float> adam;
  CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vpe
