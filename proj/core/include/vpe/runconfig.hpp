#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>

#include "vpe/dataset.hpp"
#include "vpe/model.hpp"
#include "vpe/trainer.hpp"

// Flat run configuration: every tunable as a "key = value" line. Precedence
// is defaults < config file < VPE_* environment < command-line flags; the
// fully resolved text is written next to each run's outputs.

namespace vpe {

struct RunConfig {
  // model
  int input_size = 64;
  int in_channels = 3;
  int out_channels = 3;
  int latent_dim = 300;
  std::array<int, 3> enc_channels{100, 150, 250};
  std::array<int, 3> enc_kernels{7, 4, 4};
  int mc_samples = 1;
  std::string target_mode = "prototype";
  double kl_weight = 1.0;
  double leaky_slope = 0.2;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;

  // training
  int iterations = 2000;
  int batch_size = 128;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double proto_period = 201.0;
  bool augment = true;
  double aug_rotation_deg = 360.0;
  double aug_flip_prob = 0.5;
  int val_interval = 0;

  // run
  std::string data_dir;
  std::string out_dir;
  std::uint64_t seed = 1;
  int threads = 0;

  // benchmark generation
  int classes = 30;
  int unseen = 10;
  int unseen_val = 0;
  int per_class = 100;
  int image_size = 32;
  bool imbalance = false;
  double imbalance_min_fraction = 0.1;

  // perturbation ranges for synthesized real images
  double perturb_rotation_deg = 25.0;
  double perturb_scale_min = 0.75;
  double perturb_scale_max = 1.2;
  double perturb_shear = 0.15;
  double perturb_perspective = 0.22;
  double perturb_translate = 0.12;
  double perturb_brightness = 0.25;
  double perturb_contrast_min = 0.7;
  double perturb_contrast_max = 1.3;
  double perturb_color_shift = 0.15;
  double perturb_blur_max = 1.2;
  double perturb_noise_max = 0.06;
  double perturb_occlusion_prob = 0.3;
  double perturb_occlusion_max = 0.25;
  int perturb_backgrounds = 12;

  // Applies key=value pairs; unknown keys are rejected naming the source.
  void apply_kv(const std::map<std::string, std::string>& kv, const std::string& source);
  void apply_file(const std::filesystem::path& path);
  void apply_env();  // VPE_<UPPER_KEY> variables

  std::string to_text() const;

  VpeConfig vpe_config() const;
  TrainOptions train_options() const;
  BenchmarkConfig benchmark_config() const;
  PerturbRanges perturb_ranges() const;
};

}  // namespace vpe
