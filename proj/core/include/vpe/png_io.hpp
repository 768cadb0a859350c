#pragma once

#include <filesystem>

#include "vpe/image.hpp"

namespace vpe {

// Decodes any 8/16-bit PNG into a 3xHxW float image, intensities v/255.
Image read_png(const std::filesystem::path& path);

// Writes an 8-bit PNG. 1-channel images become grayscale, 3-channel RGB.
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace vpe
