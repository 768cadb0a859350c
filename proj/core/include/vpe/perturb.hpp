#pragma once

#include <array>
#include <cstdint>

#include "vpe/image.hpp"
#include "vpe/rng.hpp"

// Synthesizes "captured" views of a prototype: geometric warp, background
// compositing, photometric shifts, blur, sensor noise and occlusion. This is
// how the benchmark manufactures its real-image side.

namespace vpe {

struct PerturbationParams {
  float rotation_deg = 0.0f;     // [-180, 180]
  float scale = 1.0f;            // [0.5, 1.5]
  float shear = 0.0f;            // [-0.5, 0.5]
  float perspective = 0.0f;      // [0, 0.4]
  float translate_x = 0.0f;      // [-0.25, 0.25] of canvas
  float translate_y = 0.0f;
  float brightness = 0.0f;       // [-0.5, 0.5] additive
  float contrast = 1.0f;         // [0.5, 1.5]
  std::array<float, 3> color_shift{0.0f, 0.0f, 0.0f};  // [-0.3, 0.3] per channel
  float blur_sigma = 0.0f;       // [0, 3] px
  float noise_stddev = 0.0f;     // [0, 0.25]
  int background_id = -1;        // -1 = blank; else procedural texture index
  float occlusion_fraction = 0.0f;  // [0, 0.5] of canvas area
  Resample resample = Resample::kBilinear;

  static PerturbationParams identity() { return {}; }
  void validate() const;
  bool is_identity() const;
};

// Sampling ranges used when the benchmark generator draws random params.
struct PerturbRanges {
  float rotation_deg = 25.0f;
  float scale_min = 0.75f, scale_max = 1.2f;
  float shear = 0.15f;
  float perspective = 0.22f;
  float translate = 0.12f;
  float brightness = 0.25f;
  float contrast_min = 0.7f, contrast_max = 1.3f;
  float color_shift = 0.15f;
  float blur_max = 1.2f;
  float noise_max = 0.06f;
  float occlusion_prob = 0.3f;
  float occlusion_max = 0.25f;
  int num_backgrounds = 12;
};

PerturbationParams draw_perturbation(Rng& rng, const PerturbRanges& ranges);

int num_background_textures();
Image background_texture(int id, std::uint64_t seed, std::size_t size);

// Warps the letterboxed prototype, composites, degrades. Output matches the
// (square, letterboxed) canvas and stays in [0, 1]. Identity params on a
// blank background reproduce the letterboxed prototype exactly.
Image perturb(const Image& prototype, const PerturbationParams& params, std::uint64_t seed);

}  // namespace vpe
