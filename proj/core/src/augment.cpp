#include "vpe/augment.hpp"

namespace vpe {

AugmentParams draw_augment(Rng& rng, const AugmentOptions& options) {
  AugmentParams p;
  p.rotation_deg = static_cast<float>(rng.uniform(0.0, options.rotation_range_deg));
  p.flip_horizontal = rng.bernoulli(options.flip_prob);
  return p;
}

Image apply_augment(const Image& img, const AugmentParams& params) {
  Image out = rotate(img, params.rotation_deg, Resample::kBilinear);
  if (params.flip_horizontal) out = flip_horizontal(out);
  return out;
}

}  // namespace vpe
