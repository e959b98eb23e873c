#pragma once

#include "bt/image.hpp"

#include <filesystem>

namespace bt {

// PNG codecs. Readers throw DataError naming the file on any failure.

/// 8-bit RGB; gray and alpha inputs are expanded or stripped.
ColorImage read_color_png(const std::filesystem::path& path);
void write_color_png(const std::filesystem::path& path, const ColorImage& img);

/// 16-bit grayscale millimeters, 0 = invalid.
DepthMap read_depth_png(const std::filesystem::path& path);
/// Depth is rounded to whole millimeters and clamped to 65535.
void write_depth_png(const std::filesystem::path& path, const DepthMap& depth);

/// 8-bit grayscale, nonzero = object.
Mask read_mask_png(const std::filesystem::path& path);
/// Object pixels are written as 255.
void write_mask_png(const std::filesystem::path& path, const Mask& mask);

}  // namespace bt
