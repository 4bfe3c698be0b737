#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "depthproj/common.hpp"

namespace depthproj {

/// Hermetic stand-ins for the usual test photographs.
///   checker   - 0/255 squares, cell size and phase from the seed
///   gradient  - linear ramp 0..255 at a seeded angle
///   noise     - fractal value noise, stretched to 0..255
///   disc, ring, bars, cross - binary (0/255) shapes
///   constant  - the seed value itself, clamped to [0,255]
Image make_procedural(const std::string& kind, std::uint64_t seed, int width, int height);

std::vector<std::string> procedural_kinds();

/// Resolves "procedural:<kind>[:<seed>][@x0,y0,x1,y1]" or an image path
/// (relative paths against `base`). The optional box places the pattern in a
/// sub-rectangle given in fractions of the frame, leaving the rest black.
/// Image files are resampled to width x height.
Image load_target(const std::string& source, const std::filesystem::path& base, int width, int height);

}  // namespace depthproj
