#pragma once

#include "vpe/image.hpp"
#include "vpe/rng.hpp"

// Paired augmentation: one rotation and one flip decision drawn per sample
// and applied identically to the real image and its prototype, so arrow-like
// symbols stay consistent with their (equally rotated) targets.

namespace vpe {

struct AugmentOptions {
  float rotation_range_deg = 360.0f;  // rotation drawn uniformly from [0, range)
  float flip_prob = 0.5f;
};

struct AugmentParams {
  float rotation_deg = 0.0f;
  bool flip_horizontal = false;
};

AugmentParams draw_augment(Rng& rng, const AugmentOptions& options);

Image apply_augment(const Image& img, const AugmentParams& params);

}  // namespace vpe
