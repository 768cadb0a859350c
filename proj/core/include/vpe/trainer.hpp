#pragma once

#include <functional>
#include <vector>

#include "vpe/checkpoint.hpp"
#include "vpe/dataset.hpp"
#include "vpe/model.hpp"

// Mini-batch training loop. Prototype self-pairs are mixed in at roughly one
// per `proto_period` draws, the rest are real images paired with their class
// prototype; optional paired augmentation precedes every step.

namespace vpe {

struct TrainOptions {
  int iterations = 2000;
  int batch_size = 128;
  double proto_period = 201.0;  // 1:200 prototype-to-real sampling
  bool augment = true;
  AugmentOptions augment_options;
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_epsilon = 1e-8f;
  std::uint64_t seed = 1;
  int val_interval = 0;  // 0 disables the validation hook
};

struct TraceRow {
  int iteration;  // 1-based
  double loss;
  double recon;
  double kl;
};

struct ValidationRow {
  int iteration;
  double accuracy;
};

struct BatchSlot {
  bool prototype_draw;
  int label;
  std::size_t real_index;  // unused for prototype draws
};

// Exposed for tests: the sampling rule behind each mini-batch.
std::vector<BatchSlot> draw_batch_plan(Rng& rng, const LoadedDataset& data,
                                       const std::vector<int>& train_labels, int batch_size,
                                       double proto_period);

struct TrainHooks {
  // Called after batch assembly (post augmentation), before the step.
  std::function<void(int iteration, const TensorF& x, const TensorF& target,
                     const std::vector<BatchSlot>& plan)>
      on_batch;
  std::function<void(const ValidationRow&)> on_validation;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  std::vector<ValidationRow> validation;
  CheckpointMeta meta;  // stream states at exit, for checkpointing
  int best_validation_iteration = 0;
  double best_validation_accuracy = -1.0;
};

TrainResult train(VpeModelF& model, AdamState<float>& adam, const LoadedDataset& data,
                  const TrainOptions& options, const TrainHooks& hooks = {});

void write_loss_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);
void write_validation_csv(const std::filesystem::path& path,
                          const std::vector<ValidationRow>& rows);

// Top-1 accuracy of val-split classes against their own prototype support.
double validation_accuracy(VpeModelF& model, const LoadedDataset& data);

}  // namespace vpe
