#pragma once

#include <cstdint>
#include <filesystem>

#include "depthproj/common.hpp"

namespace depthproj {

/// Grayscale view of a PNG. 8-bit files give values in [0,255]; 16-bit files
/// keep their raw sample values in [0,65535]. Colour inputs are reduced to
/// Rec. 601 luma; alpha is dropped.
struct LoadedImage {
  Image pixels;
  int bit_depth = 8;
};

LoadedImage read_png(const std::filesystem::path& path);

/// Rounds and clamps to [0,255].
void write_png8(const std::filesystem::path& path, const Image& image);
/// Rounds and clamps to [0,65535].
void write_png16(const std::filesystem::path& path, const Image& image);

/// Bilinear resample of `image` onto a width x height grid (pixel centres aligned).
Image resample(const Image& image, int width, int height);

}  // namespace depthproj
