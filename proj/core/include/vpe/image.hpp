#pragma once

#include "vpe/tensor.hpp"

// Images are CxHxW float tensors with intensities in [0, 1].

namespace vpe {

using Image = TensorF;

inline std::size_t image_channels(const Image& img) { return img.extent(0); }
inline std::size_t image_height(const Image& img) { return img.extent(1); }
inline std::size_t image_width(const Image& img) { return img.extent(2); }

enum class Resample { kBilinear, kNearest };

// Bilinear resize with edge clamping. Exact copy when sizes already match.
Image resize(const Image& img, std::size_t out_h, std::size_t out_w);

// Aspect-preserving resize of the longer side to `target`, centered on a
// square zero-filled canvas.
Image letterbox(const Image& img, std::size_t target);

// Rotation about the image center by `degrees` (counterclockwise), sampling
// outside the source as zero. Angle 0 is an exact copy.
Image rotate(const Image& img, float degrees, Resample resample = Resample::kBilinear);

Image flip_horizontal(const Image& img);

void clamp_unit(Image& img);
bool in_unit_range(const Image& img);

// Fraction of pixel sites where any channel differs by more than `threshold`.
double pixel_difference_fraction(const Image& a, const Image& b, float threshold = 0.1f);

double mean_abs_difference(const Image& a, const Image& b);
double l2_distance(const Image& a, const Image& b);

}  // namespace vpe
