#include "vpe/prototypes.hpp"

#include <array>
#include <cmath>
#include <string>

#include "vpe/errors.hpp"
#include "vpe/rng.hpp"

namespace vpe {
namespace {

struct Color {
  float r, g, b;
};

constexpr std::array<Color, 6> kPalette = {{
    {0.85f, 0.10f, 0.12f},  // red
    {0.12f, 0.25f, 0.85f},  // blue
    {0.10f, 0.62f, 0.22f},  // green
    {0.95f, 0.85f, 0.10f},  // yellow
    {0.93f, 0.93f, 0.93f},  // white
    {0.92f, 0.52f, 0.10f},  // orange
}};

constexpr int kNumArrowDirections = 8;
constexpr int kNumStrokeSets = 4;
constexpr int kGlyphCount = kNumArrowDirections + 1 + 1 + kNumStrokeSets;

float luminance(const Color& c) { return 0.299f * c.r + 0.587f * c.g + 0.114f * c.b; }

// Exact (cos, sin) for multiples of 45 degrees, so that opposite arrow
// orientations are exact point reflections of each other.
constexpr double kSqrtHalf = 0.70710678118654752440;
constexpr std::array<std::array<double, 2>, 8> kOctantRot = {{
    {1.0, 0.0},
    {kSqrtHalf, kSqrtHalf},
    {0.0, 1.0},
    {-kSqrtHalf, kSqrtHalf},
    {-1.0, 0.0},
    {-kSqrtHalf, -kSqrtHalf},
    {0.0, -1.0},
    {kSqrtHalf, -kSqrtHalf},
}};

bool in_rect(double x, double y, double x0, double x1, double y0, double y1) {
  return x >= x0 && x <= x1 && y >= y0 && y <= y1;
}

bool in_capsule(double x, double y, double ax, double ay, double bx, double by, double radius) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((x - ax) * dx + (y - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double px = ax + t * dx, py = ay + t * dy;
  const double ex = x - px, ey = y - py;
  return ex * ex + ey * ey <= radius * radius;
}

// Axis-aligned arrow pointing +x: shaft plus head.
bool in_base_arrow(double x, double y) {
  if (in_rect(x, y, -0.48, 0.08, -0.13, 0.13)) return true;
  if (x >= 0.08 && x <= 0.52) {
    const double half = 0.32 * (0.52 - x) / 0.44;
    return std::abs(y) <= half;
  }
  return false;
}

bool in_glyph(GlyphKind kind, int param, double x, double y) {
  switch (kind) {
    case GlyphKind::kArrow: {
      const auto& rot = kOctantRot[param & 7];
      // rotate by -angle
      const double rx = rot[0] * x + rot[1] * y;
      const double ry = -rot[1] * x + rot[0] * y;
      return in_base_arrow(rx, ry);
    }
    case GlyphKind::kBar:
      return in_rect(x, y, -0.45, 0.45, -0.15, 0.15);
    case GlyphKind::kDots: {
      for (double sy : {-0.28, 0.28}) {
        for (double sx : {-0.28, 0.28}) {
          const double dx = x - sx, dy = y - sy;
          if (dx * dx + dy * dy <= 0.17 * 0.17) return true;
        }
      }
      return false;
    }
    case GlyphKind::kStrokes:
      switch (param & 3) {
        case 0:  // one: vertical stroke with a flag
          return in_rect(x, y, -0.08, 0.08, -0.46, 0.46) ||
                 in_capsule(x, y, -0.3, 0.22, 0.0, 0.44, 0.08);
        case 1:  // seven: top bar plus diagonal
          return in_rect(x, y, -0.36, 0.36, 0.3, 0.46) ||
                 in_capsule(x, y, 0.3, 0.28, -0.14, -0.46, 0.1);
        case 2:  // ell
          return in_rect(x, y, -0.4, -0.22, -0.46, 0.46) ||
                 in_rect(x, y, -0.4, 0.36, -0.46, -0.28);
        default:  // tee
          return in_rect(x, y, -0.4, 0.4, 0.28, 0.46) ||
                 in_rect(x, y, -0.09, 0.09, -0.46, 0.46);
      }
  }
  return false;
}

bool in_triangle(double x, double y, double circumradius) {
  // Equilateral, apex up, circumcenter at the origin.
  const double ax = 0.0, ay = circumradius;
  const double bx = -circumradius * 0.86602540378443865, by = -circumradius * 0.5;
  const double cx = circumradius * 0.86602540378443865, cy = -circumradius * 0.5;
  auto side = [&](double x0, double y0, double x1, double y1) {
    return (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0);
  };
  const double s1 = side(ax, ay, bx, by);
  const double s2 = side(bx, by, cx, cy);
  const double s3 = side(cx, cy, ax, ay);
  return (s1 <= 0 && s2 <= 0 && s3 <= 0) || (s1 >= 0 && s2 >= 0 && s3 >= 0);
}

bool in_shape(BorderShape shape, double x, double y, double scale) {
  switch (shape) {
    case BorderShape::kCircle:
      return x * x + y * y <= scale * scale;
    case BorderShape::kTriangle:
      return in_triangle(x, y, scale * 1.12);
    case BorderShape::kSquare:
      return std::abs(x) <= scale * 0.92 && std::abs(y) <= scale * 0.92;
  }
  return false;
}

Color shade(const PrototypeStyle& style, double x, double y) {
  constexpr double kOuter = 0.94;
  constexpr double kInner = 0.76;
  if (!in_shape(style.shape, x, y, kOuter)) return {0.0f, 0.0f, 0.0f};
  const Color fill = kPalette[style.color_index];
  const bool light_fill = luminance(fill) >= 0.45f;
  if (!in_shape(style.shape, x, y, kInner)) {
    return light_fill ? Color{0.08f, 0.08f, 0.10f} : Color{0.96f, 0.96f, 0.96f};
  }
  double gx = x, gy = y;
  double gscale = 0.62;
  if (style.shape == BorderShape::kTriangle) {
    gscale = 0.44;
    gy += 0.16;  // triangles have their visual mass below center
  }
  if (in_glyph(style.glyph, style.glyph_param, gx / gscale, gy / gscale)) {
    return light_fill ? Color{0.05f, 0.05f, 0.06f} : Color{0.97f, 0.97f, 0.97f};
  }
  return fill;
}

}  // namespace

int prototype_style_budget() {
  return 3 * static_cast<int>(kPalette.size()) * kGlyphCount;
}

std::vector<PrototypeStyle> assign_styles(int n_classes, std::uint64_t seed) {
  const int budget = prototype_style_budget();
  if (n_classes < 2) throw ConfigError("render_prototypes: need at least 2 classes");
  if (n_classes > budget) {
    throw ConfigError("render_prototypes: " + std::to_string(n_classes) +
                      " classes exceed the distinct-style budget of " + std::to_string(budget));
  }
  std::vector<int> order(budget);
  for (int i = 0; i < budget; ++i) order[i] = i;
  Rng rng = Rng::stream(seed, "prototype-styles");
  for (int i = budget - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }
  std::vector<PrototypeStyle> styles;
  styles.reserve(n_classes);
  for (int idx = 0; idx < n_classes; ++idx) {
    int code = order[idx];
    const int glyph_code = code % kGlyphCount;
    code /= kGlyphCount;
    const int color = code % static_cast<int>(kPalette.size());
    code /= static_cast<int>(kPalette.size());
    const auto shape = static_cast<BorderShape>(code % 3);
    PrototypeStyle style;
    style.shape = shape;
    style.color_index = color;
    if (glyph_code < kNumArrowDirections) {
      style.glyph = GlyphKind::kArrow;
      style.glyph_param = glyph_code;
    } else if (glyph_code == kNumArrowDirections) {
      style.glyph = GlyphKind::kBar;
      style.glyph_param = 0;
    } else if (glyph_code == kNumArrowDirections + 1) {
      style.glyph = GlyphKind::kDots;
      style.glyph_param = 0;
    } else {
      style.glyph = GlyphKind::kStrokes;
      style.glyph_param = glyph_code - kNumArrowDirections - 2;
    }
    styles.push_back(style);
  }
  return styles;
}

Image render_prototype(const PrototypeStyle& style, std::size_t size) {
  Image out({3, size, size});
  constexpr int kSS = 4;  // 4x4 supersampling, offsets symmetric under point reflection
  const double inv = 2.0 / static_cast<double>(size);
  for (std::size_t py = 0; py < size; ++py) {
    for (std::size_t px = 0; px < size; ++px) {
      double r = 0, g = 0, b = 0;
      for (int sy = 0; sy < kSS; ++sy) {
        for (int sx = 0; sx < kSS; ++sx) {
          const double x = (static_cast<double>(px) + (sx + 0.5) / kSS) * inv - 1.0;
          // image rows grow downward; flip y so glyph geometry reads upright
          const double y = 1.0 - (static_cast<double>(py) + (sy + 0.5) / kSS) * inv;
          const Color c = shade(style, x, y);
          r += c.r;
          g += c.g;
          b += c.b;
        }
      }
      const float norm = 1.0f / (kSS * kSS);
      out.at3(0, py, px) = static_cast<float>(r) * norm;
      out.at3(1, py, px) = static_cast<float>(g) * norm;
      out.at3(2, py, px) = static_cast<float>(b) * norm;
    }
  }
  return out;
}

std::vector<Image> render_prototypes(int n_classes, std::uint64_t seed, std::size_t size) {
  const auto styles = assign_styles(n_classes, seed);
  std::vector<Image> images;
  images.reserve(styles.size());
  for (const auto& style : styles) images.push_back(render_prototype(style, size));
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (std::size_t j = i + 1; j < images.size(); ++j) {
      if (pixel_difference_fraction(images[i], images[j]) < 0.05) {
        throw ConfigError("render_prototypes: classes " + std::to_string(i) + " and " +
                          std::to_string(j) + " are not visually distinct");
      }
    }
  }
  return images;
}

}  // namespace vpe
