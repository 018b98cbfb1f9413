#pragma once

#include <string>

#include "qmix/color.hpp"

namespace qmix {

// Reads an 8-bit PNG and expands gray, palette and alpha variants to RGB.
// Throws UnsupportedFormat for 16-bit input and IO for decode failures.
RgbImage read_png(const std::string& path);
void write_png(const std::string& path, const RgbImage& img);
// Mask written as 8-bit gray with values {0, 255}.
void write_mask_png(const std::string& path, const BinaryMask& mask);

}  // namespace qmix
