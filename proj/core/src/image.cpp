#include "vpe/image.hpp"

#include <algorithm>
#include <cmath>

#include "vpe/errors.hpp"

namespace vpe {

Image resize(const Image& img, std::size_t out_h, std::size_t out_w) {
  const std::size_t c = image_channels(img), h = image_height(img), w = image_width(img);
  if (h == out_h && w == out_w) return img;
  Image out({c, out_h, out_w});
  const float sy = static_cast<float>(h) / static_cast<float>(out_h);
  const float sx = static_cast<float>(w) / static_cast<float>(out_w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* src = img.data() + ch * h * w;
    float* dst = out.data() + ch * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const float fy = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
      const float cy = std::clamp(fy, 0.0f, static_cast<float>(h - 1));
      const std::size_t y0 = static_cast<std::size_t>(cy);
      const std::size_t y1 = std::min(y0 + 1, h - 1);
      const float wy = cy - static_cast<float>(y0);
      for (std::size_t x = 0; x < out_w; ++x) {
        const float fx = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
        const float cx = std::clamp(fx, 0.0f, static_cast<float>(w - 1));
        const std::size_t x0 = static_cast<std::size_t>(cx);
        const std::size_t x1 = std::min(x0 + 1, w - 1);
        const float wx = cx - static_cast<float>(x0);
        const float top = src[y0 * w + x0] * (1.0f - wx) + src[y0 * w + x1] * wx;
        const float bot = src[y1 * w + x0] * (1.0f - wx) + src[y1 * w + x1] * wx;
        dst[y * out_w + x] = top * (1.0f - wy) + bot * wy;
      }
    }
  }
  return out;
}

Image letterbox(const Image& img, std::size_t target) {
  if (target == 0) throw std::invalid_argument("letterbox: target must be positive");
  if (img.rank() != 3 || img.numel() == 0) {
    throw DataError("letterbox: empty or non-CHW image");
  }
  const std::size_t c = image_channels(img), h = image_height(img), w = image_width(img);
  std::size_t new_h, new_w;
  if (h >= w) {
    new_h = target;
    new_w = std::max<std::size_t>(1, (w * target + h / 2) / h);
  } else {
    new_w = target;
    new_h = std::max<std::size_t>(1, (h * target + w / 2) / w);
  }
  Image scaled = resize(img, new_h, new_w);
  if (new_h == target && new_w == target) return scaled;
  Image out({c, target, target});
  const std::size_t off_y = (target - new_h) / 2;
  const std::size_t off_x = (target - new_w) / 2;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < new_h; ++y) {
      const float* src = scaled.data() + (ch * new_h + y) * new_w;
      float* dst = out.data() + (ch * target + y + off_y) * target + off_x;
      std::copy(src, src + new_w, dst);
    }
  }
  return out;
}

Image rotate(const Image& img, float degrees, Resample resample) {
  const std::size_t c = image_channels(img), h = image_height(img), w = image_width(img);
  if (degrees == 0.0f) return img;
  const double rad = static_cast<double>(degrees) * 3.141592653589793238462643 / 180.0;
  // Inverse map: output pixel -> source location (rotate by -angle).
  const double cos_a = std::cos(-rad), sin_a = std::sin(-rad);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  Image out({c, h, w});
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double dy = static_cast<double>(y) - cy;
      const double dx = static_cast<double>(x) - cx;
      const double sy = cy + dy * cos_a - dx * sin_a;
      const double sx = cx + dy * sin_a + dx * cos_a;
      if (resample == Resample::kNearest) {
        const long iy = std::lround(sy), ix = std::lround(sx);
        if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
        for (std::size_t ch = 0; ch < c; ++ch) {
          out.at3(ch, y, x) = img.at3(ch, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
        }
      } else {
        const double fy = std::floor(sy), fx = std::floor(sx);
        const long y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
        const float wy = static_cast<float>(sy - fy), wx = static_cast<float>(sx - fx);
        auto sample = [&](long yy, long xx, std::size_t ch) -> float {
          if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) {
            return 0.0f;
          }
          return img.at3(ch, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
        };
        for (std::size_t ch = 0; ch < c; ++ch) {
          const float top = sample(y0, x0, ch) * (1.0f - wx) + sample(y0, x0 + 1, ch) * wx;
          const float bot = sample(y0 + 1, x0, ch) * (1.0f - wx) + sample(y0 + 1, x0 + 1, ch) * wx;
          out.at3(ch, y, x) = top * (1.0f - wy) + bot * wy;
        }
      }
    }
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  const std::size_t c = image_channels(img), h = image_height(img), w = image_width(img);
  Image out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      const float* src = img.data() + (ch * h + y) * w;
      float* dst = out.data() + (ch * h + y) * w;
      for (std::size_t x = 0; x < w; ++x) dst[x] = src[w - 1 - x];
    }
  }
  return out;
}

void clamp_unit(Image& img) {
  for (std::size_t i = 0; i < img.numel(); ++i) img[i] = std::clamp(img[i], 0.0f, 1.0f);
}

bool in_unit_range(const Image& img) {
  for (std::size_t i = 0; i < img.numel(); ++i) {
    if (!(img[i] >= 0.0f && img[i] <= 1.0f)) return false;
  }
  return true;
}

double pixel_difference_fraction(const Image& a, const Image& b, float threshold) {
  if (!a.same_shape(b)) throw std::invalid_argument("pixel_difference_fraction: shape mismatch");
  const std::size_t c = image_channels(a), hw = image_height(a) * image_width(a);
  std::size_t differing = 0;
  for (std::size_t p = 0; p < hw; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      if (std::abs(a[ch * hw + p] - b[ch * hw + p]) > threshold) {
        ++differing;
        break;
      }
    }
  }
  return static_cast<double>(differing) / static_cast<double>(hw);
}

double mean_abs_difference(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mean_abs_difference: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += std::abs(static_cast<double>(a[i]) - b[i]);
  return acc / static_cast<double>(a.numel());
}

double l2_distance(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("l2_distance: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace vpe
