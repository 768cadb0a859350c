#include "vpe/perturb.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "vpe/errors.hpp"

namespace vpe {

void PerturbationParams::validate() const {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("perturb: ") + what + " out of range");
  };
  check(rotation_deg >= -180.0f && rotation_deg <= 180.0f, "rotation_deg");
  check(scale >= 0.5f && scale <= 1.5f, "scale");
  check(shear >= -0.5f && shear <= 0.5f, "shear");
  check(perspective >= 0.0f && perspective <= 0.4f, "perspective");
  check(std::abs(translate_x) <= 0.25f && std::abs(translate_y) <= 0.25f, "translate");
  check(brightness >= -0.5f && brightness <= 0.5f, "brightness");
  check(contrast >= 0.5f && contrast <= 1.5f, "contrast");
  for (float s : color_shift) check(s >= -0.3f && s <= 0.3f, "color_shift");
  check(blur_sigma >= 0.0f && blur_sigma <= 3.0f, "blur_sigma");
  check(noise_stddev >= 0.0f && noise_stddev <= 0.25f, "noise_stddev");
  check(background_id >= -1 && background_id < num_background_textures(), "background_id");
  check(occlusion_fraction >= 0.0f && occlusion_fraction <= 0.5f, "occlusion_fraction");
}

bool PerturbationParams::is_identity() const {
  return rotation_deg == 0.0f && scale == 1.0f && shear == 0.0f && perspective == 0.0f &&
         translate_x == 0.0f && translate_y == 0.0f && brightness == 0.0f && contrast == 1.0f &&
         color_shift[0] == 0.0f && color_shift[1] == 0.0f && color_shift[2] == 0.0f &&
         blur_sigma == 0.0f && noise_stddev == 0.0f && background_id == -1 &&
         occlusion_fraction == 0.0f;
}

PerturbationParams draw_perturbation(Rng& rng, const PerturbRanges& r) {
  PerturbationParams p;
  p.rotation_deg = static_cast<float>(rng.uniform(-r.rotation_deg, r.rotation_deg));
  p.scale = static_cast<float>(rng.uniform(r.scale_min, r.scale_max));
  p.shear = static_cast<float>(rng.uniform(-r.shear, r.shear));
  p.perspective = static_cast<float>(rng.uniform(0.0, r.perspective));
  p.translate_x = static_cast<float>(rng.uniform(-r.translate, r.translate));
  p.translate_y = static_cast<float>(rng.uniform(-r.translate, r.translate));
  p.brightness = static_cast<float>(rng.uniform(-r.brightness, r.brightness));
  p.contrast = static_cast<float>(rng.uniform(r.contrast_min, r.contrast_max));
  for (auto& s : p.color_shift) s = static_cast<float>(rng.uniform(-r.color_shift, r.color_shift));
  p.blur_sigma = static_cast<float>(rng.uniform(0.0, r.blur_max));
  p.noise_stddev = static_cast<float>(rng.uniform(0.0, r.noise_max));
  const int nbg = std::min(r.num_backgrounds, num_background_textures());
  p.background_id = nbg > 0 ? static_cast<int>(rng.uniform_int(nbg)) : -1;
  p.occlusion_fraction =
      rng.bernoulli(r.occlusion_prob) ? static_cast<float>(rng.uniform(0.0, r.occlusion_max)) : 0.0f;
  return p;
}

namespace {

constexpr int kNumTextures = 12;

// Smooth value noise on a coarse lattice.
float value_noise(Rng& rng, std::size_t size, std::size_t y, std::size_t x,
                  const std::vector<float>& lattice, std::size_t cells) {
  (void)rng;
  const float fy = static_cast<float>(y) / static_cast<float>(size) * cells;
  const float fx = static_cast<float>(x) / static_cast<float>(size) * cells;
  const std::size_t y0 = std::min<std::size_t>(static_cast<std::size_t>(fy), cells - 1);
  const std::size_t x0 = std::min<std::size_t>(static_cast<std::size_t>(fx), cells - 1);
  const std::size_t y1 = std::min(y0 + 1, cells);
  const std::size_t x1 = std::min(x0 + 1, cells);
  const float wy = fy - static_cast<float>(y0);
  const float wx = fx - static_cast<float>(x0);
  auto at = [&](std::size_t yy, std::size_t xx) { return lattice[yy * (cells + 1) + xx]; };
  const float top = at(y0, x0) * (1 - wx) + at(y0, x1) * wx;
  const float bot = at(y1, x0) * (1 - wx) + at(y1, x1) * wx;
  return top * (1 - wy) + bot * wy;
}

}  // namespace

int num_background_textures() { return kNumTextures; }

Image background_texture(int id, std::uint64_t seed, std::size_t size) {
  Image out({3, size, size});
  Rng rng = Rng::stream(seed, "background-" + std::to_string(id));
  const int family = id % 3;
  if (family == 0) {
    // blotchy value noise
    const std::size_t cells = 3 + id % 4;
    std::array<std::vector<float>, 3> lattices;
    for (auto& l : lattices) {
      l.resize((cells + 1) * (cells + 1));
      for (auto& v : l) v = static_cast<float>(rng.uniform(0.1, 0.9));
    }
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          out.at3(c, y, x) = value_noise(rng, size, y, x, lattices[c], cells);
        }
      }
    }
  } else if (family == 1) {
    // linear gradient between two random colors
    std::array<float, 3> c0, c1;
    for (auto& v : c0) v = static_cast<float>(rng.uniform(0.05, 0.95));
    for (auto& v : c1) v = static_cast<float>(rng.uniform(0.05, 0.95));
    const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979);
    const float dx = static_cast<float>(std::cos(angle));
    const float dy = static_cast<float>(std::sin(angle));
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const float u = (static_cast<float>(x) / size - 0.5f) * dx +
                        (static_cast<float>(y) / size - 0.5f) * dy + 0.5f;
        const float t = std::clamp(u, 0.0f, 1.0f);
        for (std::size_t c = 0; c < 3; ++c) out.at3(c, y, x) = c0[c] * (1 - t) + c1[c] * t;
      }
    }
  } else {
    // stripes at a random angle
    std::array<float, 3> c0, c1;
    for (auto& v : c0) v = static_cast<float>(rng.uniform(0.1, 0.9));
    for (auto& v : c1) v = static_cast<float>(rng.uniform(0.1, 0.9));
    const double angle = rng.uniform(0.0, 3.14159265358979);
    const double freq = rng.uniform(2.0, 6.0);
    const double phase = rng.uniform(0.0, 1.0);
    const float dx = static_cast<float>(std::cos(angle));
    const float dy = static_cast<float>(std::sin(angle));
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double u = (static_cast<double>(x) / size) * dx + (static_cast<double>(y) / size) * dy;
        const bool a = std::fmod(u * freq + phase, 1.0) < 0.5;
        for (std::size_t c = 0; c < 3; ++c) out.at3(c, y, x) = a ? c0[c] : c1[c];
      }
    }
  }
  return out;
}

namespace {

void gaussian_blur(Image& img, float sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(2.5f * sigma)));
  std::vector<float> kernel(2 * radius + 1);
  float sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5f * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= sum;

  const std::size_t c = image_channels(img), h = image_height(img), w = image_width(img);
  Image tmp(img.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          const long xx = std::clamp<long>(static_cast<long>(x) + i, 0, static_cast<long>(w) - 1);
          acc += kernel[i + radius] * img.at3(ch, y, static_cast<std::size_t>(xx));
        }
        tmp.at3(ch, y, x) = acc;
      }
    }
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        float acc = 0;
        for (int i = -radius; i <= radius; ++i) {
          const long yy = std::clamp<long>(static_cast<long>(y) + i, 0, static_cast<long>(h) - 1);
          acc += kernel[i + radius] * tmp.at3(ch, static_cast<std::size_t>(yy), x);
        }
        img.at3(ch, y, x) = acc;
      }
    }
  }
}

}  // namespace

Image perturb(const Image& prototype, const PerturbationParams& params, std::uint64_t seed) {
  params.validate();
  const std::size_t size = std::max(image_height(prototype), image_width(prototype));
  Image canvas = letterbox(prototype, size);
  if (params.is_identity()) return canvas;

  const std::size_t c = image_channels(canvas);
  Image warped({c, size, size});
  Image alpha({1, size, size});

  const bool geometric = params.rotation_deg != 0.0f || params.scale != 1.0f ||
                         params.shear != 0.0f || params.perspective != 0.0f ||
                         params.translate_x != 0.0f || params.translate_y != 0.0f;
  if (geometric) {
    // Inverse mapping: output pixel -> source pixel of the letterboxed
    // prototype. Forward transform is scale*rot*shear then perspective and
    // translation; we apply the algebraic inverse per pixel.
    const double rad = params.rotation_deg * 3.14159265358979 / 180.0;
    const double cos_a = std::cos(rad), sin_a = std::sin(rad);
    const double s = params.scale;
    const double shear = params.shear;
    const double half = (static_cast<double>(size) - 1.0) / 2.0;
    // forward: [u,v] = R * Sh * s * [x,y]; Sh = [[1, shear],[0,1]]
    // combined matrix M
    const double m00 = s * cos_a, m01 = s * (cos_a * shear - sin_a);
    const double m10 = s * sin_a, m11 = s * (sin_a * shear + cos_a);
    const double det = m00 * m11 - m01 * m10;
    const double i00 = m11 / det, i01 = -m01 / det;
    const double i10 = -m10 / det, i11 = m00 / det;
    const double px = params.perspective / static_cast<double>(size);
    const double tx = params.translate_x * static_cast<double>(size);
    const double ty = params.translate_y * static_cast<double>(size);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        double u = static_cast<double>(x) - half - tx;
        double v = static_cast<double>(y) - half - ty;
        // undo the mild perspective foreshortening (applied along y)
        const double wfac = 1.0 + px * v;
        u *= wfac;
        v *= wfac;
        const double sx = i00 * u + i01 * v + half;
        const double sy = i10 * u + i11 * v + half;
        float a = 0.0f;
        if (params.resample == Resample::kNearest) {
          const long iy = std::lround(sy), ix = std::lround(sx);
          if (iy >= 0 && ix >= 0 && iy < static_cast<long>(size) && ix < static_cast<long>(size)) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              warped.at3(ch, y, x) = canvas.at3(ch, static_cast<std::size_t>(iy),
                                                static_cast<std::size_t>(ix));
            }
            a = 1.0f;
          }
        } else {
          const double fy = std::floor(sy), fx = std::floor(sx);
          const long y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
          const float wy = static_cast<float>(sy - fy), wx = static_cast<float>(sx - fx);
          auto cov = [&](long yy, long xx) -> float {
            return (yy >= 0 && xx >= 0 && yy < static_cast<long>(size) &&
                    xx < static_cast<long>(size))
                       ? 1.0f
                       : 0.0f;
          };
          auto sample = [&](long yy, long xx, std::size_t ch) -> float {
            return cov(yy, xx) > 0 ? canvas.at3(ch, static_cast<std::size_t>(yy),
                                                static_cast<std::size_t>(xx))
                                   : 0.0f;
          };
          a = (cov(y0, x0) * (1 - wx) + cov(y0, x0 + 1) * wx) * (1 - wy) +
              (cov(y0 + 1, x0) * (1 - wx) + cov(y0 + 1, x0 + 1) * wx) * wy;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const float top = sample(y0, x0, ch) * (1 - wx) + sample(y0, x0 + 1, ch) * wx;
            const float bot = sample(y0 + 1, x0, ch) * (1 - wx) + sample(y0 + 1, x0 + 1, ch) * wx;
            warped.at3(ch, y, x) = top * (1 - wy) + bot * wy;
          }
        }
        alpha.at3(0, y, x) = a;
      }
    }
  } else {
    warped = canvas;
    alpha.fill(1.0f);
  }

  Image out({c, size, size});
  if (params.background_id >= 0) {
    Image bg = background_texture(params.background_id, seed, size);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t p = 0; p < size * size; ++p) {
        const float a = alpha[p];
        out[ch * size * size + p] =
            warped[ch * size * size + p] * a + bg[ch * size * size + p] * (1.0f - a);
      }
    }
  } else {
    out = warped;
  }

  Rng rng = Rng::stream(seed, "perturb-degrade");
  if (params.occlusion_fraction > 0.0f) {
    const double area = params.occlusion_fraction * size * size;
    const double aspect = rng.uniform(0.5, 2.0);
    const std::size_t ow = std::max<std::size_t>(
        1, std::min<std::size_t>(size, static_cast<std::size_t>(std::sqrt(area * aspect))));
    const std::size_t oh = std::max<std::size_t>(
        1, std::min<std::size_t>(size, static_cast<std::size_t>(area / ow)));
    const std::size_t oy = rng.uniform_int(size - oh + 1);
    const std::size_t ox = rng.uniform_int(size - ow + 1);
    std::array<float, 3> color;
    for (auto& v : color) v = static_cast<float>(rng.uniform(0.0, 1.0));
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t y = oy; y < oy + oh; ++y) {
        for (std::size_t x = ox; x < ox + ow; ++x) out.at3(ch, y, x) = color[ch % 3];
      }
    }
  }

  const bool photometric = params.brightness != 0.0f || params.contrast != 1.0f ||
                           params.color_shift[0] != 0.0f || params.color_shift[1] != 0.0f ||
                           params.color_shift[2] != 0.0f;
  if (photometric) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const float shift = params.color_shift[ch % 3];
      for (std::size_t p = 0; p < size * size; ++p) {
        float& v = out[ch * size * size + p];
        v = (v - 0.5f) * params.contrast + 0.5f + params.brightness + shift;
      }
    }
  }

  if (params.blur_sigma > 0.0f) gaussian_blur(out, params.blur_sigma);

  if (params.noise_stddev > 0.0f) {
    for (std::size_t i = 0; i < out.numel(); ++i) {
      out[i] += params.noise_stddev * static_cast<float>(rng.normal());
    }
  }

  clamp_unit(out);
  return out;
}

}  // namespace vpe
