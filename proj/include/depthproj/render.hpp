#pragma once

#include <Eigen/Core>

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "depthproj/common.hpp"
#include "depthproj/scene.hpp"
#include "depthproj/system.hpp"

namespace depthproj {

/// Light received by one surface, in camera raster coordinates. Pixels outside
/// `mask` (not on the surface, or lit by no projector) are 0.
struct RecombinedImage {
  int surface = 0;
  Image pixels;
  Mask mask;
};

/// Sums the clamped drive values of every projector pixel linked through q,
/// weighted exactly as in the assembled system for `convention`.
std::vector<RecombinedImage> render_patterns(const SceneDescription& scene, const InverseProjectionMap& q,
                                             std::span<const PatternImage> patterns, Convention convention,
                                             int threads = 0);

/// Pixels at which both images are defined and mask is set. Empty mask throws Error.
double psnr(const Image& reference, const Image& test, const Mask& mask);

/// Mean SSIM over 8x8 windows (stride 1) that lie entirely inside the mask.
/// When the mask holds no full window, a single window spanning all masked
/// pixels is used instead.
double ssim(const Image& reference, const Image& test, const Mask& mask);

inline constexpr int kSsimWindow = 8;

struct QualityRecord {
  int surface = 0;
  std::string method;
  double psnr = 0.0;
  double ssim = 0.0;
  double value_min = 0.0;
  double value_max = 0.0;
  /// (max - min) / 255 of the exported drive values.
  double span = 0.0;
};

/// Difference image |a - b| inside the mask, 0 elsewhere.
Image difference_image(const Image& a, const Image& b, const Mask& mask);

}  // namespace depthproj
