#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "depthproj/common.hpp"
#include "depthproj/scene.hpp"

namespace depthproj {

// ---------------------------------------------------------------- Gray code

constexpr std::uint32_t gray_encode(std::uint32_t value) { return value ^ (value >> 1); }

constexpr std::uint32_t gray_decode(std::uint32_t code) {
  std::uint32_t value = code;
  for (std::uint32_t shift = 1; shift < 32; shift <<= 1) value ^= value >> shift;
  return value;
}

/// ceil(log2(extent)), at least 1.
int gray_bit_count(int extent);

enum class Axis { X, Y };

struct GrayCodeSequence {
  Axis axis = Axis::X;
  int bits = 0;
  /// frames[b] is 255 where bit b of the Gray code of the pixel coordinate is set.
  std::vector<Raster<std::uint8_t>> frames;
};

GrayCodeSequence make_gray_code(Resolution projector, Axis axis);

// ---------------------------------------------------------------- capture

/// Per camera pixel: the projector pixel lighting the visible surface point
/// (-1 when unlit) and the linear gain albedo * (L.N) / d^2 of that path.
struct CaptureModel {
  int projector = 0;
  int layer = 0;
  Resolution camera;
  Resolution projector_resolution;
  std::vector<std::int32_t> source;
  std::vector<double> gain;
};

CaptureModel build_capture_model(const SceneDescription& scene, int projector, int layer, int threads = 0);

/// Linear camera image of `pattern` (projector resolution) projected on `layer`.
Image simulate_capture(const CaptureModel& model, const Image& pattern);
Image simulate_capture(const SceneDescription& scene, int projector, const Image& pattern, int layer,
                       int threads = 0);

// ---------------------------------------------------------------- maps

inline constexpr std::int32_t kUndefined = -1;

/// Forward map f_j: camera pixel -> projector pixel, and its inverse.
struct CorrespondenceMap {
  int projector = 0;
  int layer = 0;
  Resolution camera;
  Resolution projector_resolution;
  Raster<std::int32_t> forward_x, forward_y;  // camera raster, kUndefined when unknown
  Raster<std::int32_t> inverse_x, inverse_y;  // projector raster, kUndefined when unknown

  CorrespondenceMap() = default;
  CorrespondenceMap(int projector, int layer, Resolution camera, Resolution projector_resolution);

  [[nodiscard]] std::optional<Eigen::Vector2i> forward(int x, int y) const;
  [[nodiscard]] std::optional<Eigen::Vector2i> inverse(int x, int y) const;
  [[nodiscard]] Eigen::Index defined_count() const;
  /// Rebuilds the inverse from the forward map, first camera pixel in scan order wins.
  void rebuild_inverse();
};

/// Geometric ground truth: projects each camera-ray hit straight into the projector.
CorrespondenceMap geometric_correspondences(const SceneDescription& scene, int projector, int layer,
                                            int threads = 0);

/// Simulated Gray-code acquisition and decoding for one projector and layer.
/// Throws depthproj::Error when no camera pixel decodes (degenerate scene).
CorrespondenceMap decode_correspondences(const SceneDescription& scene, int projector, int layer,
                                         const CalibrationSettings& settings, int threads = 0);

struct HoleFillSettings {
  int quorum = 5;
  int max_iterations = 10;
};

/// Fills undefined forward entries that have at least `quorum` defined
/// 8-neighbours with the component-wise median of those neighbours.
CorrespondenceMap fill_holes(const CorrespondenceMap& map, HoleFillSettings settings = {});

/// Binary layout (little endian): "DPCM", u32 version, i32 projector, i32 layer,
/// u32 camera w/h, u32 projector w/h, then forward (camera raster) and inverse
/// (projector raster) entries as u16 pairs with 0xFFFF for undefined.
void write_correspondence_map(const CorrespondenceMap& map, std::ostream& out);
CorrespondenceMap read_correspondence_map(std::istream& in);
void write_correspondence_map(const CorrespondenceMap& map, const std::string& path);
CorrespondenceMap read_correspondence_map(const std::string& path);

/// One line per defined forward entry: "cx cy px py".
void dump_correspondence_map(const CorrespondenceMap& map, std::ostream& out);

// ---------------------------------------------------------------- photometric

/// Measured response of `projector` to uniform drive levels, as the linear
/// calibration camera would record it (channel-specific model).
std::vector<GammaSample> measure_response(const ProjectorModel& projector, int channel, int levels = 32,
                                          double relative_noise = 0.0, std::uint64_t seed = 0);

}  // namespace depthproj
