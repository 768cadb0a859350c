#pragma once

#include <cstdint>
#include <vector>

#include "vpe/image.hpp"

// Procedural prototype renderer: border shape x fill color x interior glyph.
// Stands in for canonical sign/logo artwork so the benchmark ships with the
// repository.

namespace vpe {

enum class BorderShape { kCircle, kTriangle, kSquare };

enum class GlyphKind {
  kArrow,   // parameter selects one of 8 orientations (multiples of 45 deg)
  kBar,
  kDots,
  kStrokes  // parameter selects one of 4 digit-like stroke sets
};

struct PrototypeStyle {
  BorderShape shape;
  int color_index;  // into the primary palette
  GlyphKind glyph;
  int glyph_param;
};

// Number of distinct style combinations available.
int prototype_style_budget();

// The style assigned to each class for a given seed (deterministic shuffle).
std::vector<PrototypeStyle> assign_styles(int n_classes, std::uint64_t seed);

Image render_prototype(const PrototypeStyle& style, std::size_t size);

// n_classes distinct prototypes. Any two differ on at least 5% of pixels;
// violating that (or exceeding the style budget) is rejected.
std::vector<Image> render_prototypes(int n_classes, std::uint64_t seed, std::size_t size = 32);

}  // namespace vpe
