#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "depthproj/calib.hpp"
#include "depthproj/common.hpp"
#include "depthproj/scene.hpp"

namespace depthproj {

/// Desired intensities on one surface, in camera raster coordinates.
struct TargetImage {
  int surface = 0;
  Image pixels;
};

/// Drive values of one projector.
struct PatternImage {
  int projector = 0;
  Image pixels;
};

/// Link between a surface sample and one projector. `pixel` is the 1-based
/// linear index m of the lighting projector pixel, 0 for the imaginary unlit pixel.
struct ProjectorLink {
  std::int32_t pixel = 0;
  double distance = 0.0;
  double cosine = 1.0;
};

struct SurfaceSample {
  int surface = 0;
  int camera_index = 0;  // y * camera width + x
};

/// q(k, n, j): which pattern pixel of projector j lights image pixel n of surface k.
class InverseProjectionMap {
 public:
  InverseProjectionMap() = default;
  InverseProjectionMap(int projector_count, int surface_count, Resolution camera);

  /// Appends a sample with all links unlit; returns its index.
  std::size_t add_sample(SurfaceSample sample);

  [[nodiscard]] std::int32_t q(int surface, int camera_index, int projector) const;
  [[nodiscard]] std::span<const ProjectorLink> links(std::size_t sample) const {
    return {links_.data() + sample * static_cast<std::size_t>(projector_count_),
            static_cast<std::size_t>(projector_count_)};
  }
  [[nodiscard]] std::span<ProjectorLink> links(std::size_t sample) {
    return {links_.data() + sample * static_cast<std::size_t>(projector_count_),
            static_cast<std::size_t>(projector_count_)};
  }
  [[nodiscard]] const std::vector<SurfaceSample>& samples() const { return samples_; }
  [[nodiscard]] int projector_count() const { return projector_count_; }
  [[nodiscard]] Resolution camera() const { return camera_; }
  /// Sample index of camera pixel `camera_index` on `surface`, or -1.
  [[nodiscard]] std::int64_t sample_at(int surface, int camera_index) const;

 private:
  int projector_count_ = 0;
  Resolution camera_;
  std::vector<SurfaceSample> samples_;
  std::vector<ProjectorLink> links_;
  std::vector<Raster<std::int32_t>> sample_index_;  // per surface, camera raster
};

/// Builds q from the forward correspondence maps. Each layer's camera pixels
/// become samples of the surface they see; `maps` may cover any subset of
/// (projector, layer) pairs, missing pairs leave links unlit.
InverseProjectionMap build_inverse_projection(const SceneDescription& scene,
                                              std::span<const CorrespondenceMap> maps, int threads = 0);

/// d^2 / (L.N). Throws std::domain_error for cosine <= 0 or distance <= 0.
double attenuation_weight(double distance, double cosine);

/// Coefficient multiplying the drive value of a link, including albedo and the
/// reference-distance normalisation. Returns 0 for unlit links.
double link_weight(const ProjectorLink& link, double albedo, Convention convention, double reference_distance);

struct RowInfo {
  int surface = 0;
  int camera_index = 0;
};

/// i = A p restricted to illuminated target pixels. Columns are laid out per
/// projector: column = column_offsets[j] + (m - 1).
struct SparseSystem {
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
  Eigen::VectorXd rhs;
  std::vector<RowInfo> rows;
  std::vector<RowInfo> infeasible;
  std::vector<Eigen::Index> column_offsets;  // size J + 1
  std::vector<Resolution> projector_resolutions;
  Convention convention = Convention::Verbatim;

  [[nodiscard]] int projector_count() const { return static_cast<int>(projector_resolutions.size()); }
  [[nodiscard]] Eigen::Index cols() const { return column_offsets.back(); }
};

SparseSystem assemble(const SceneDescription& scene, const InverseProjectionMap& q,
                      std::span<const TargetImage> targets, Convention convention = Convention::Verbatim);

/// Same matrix, new right-hand side taken from `targets`.
Eigen::VectorXd gather_rhs(const SparseSystem& system, std::span<const TargetImage> targets);

/// Stacks pattern rasters into the column vector p.
Eigen::VectorXd flatten_patterns(const SparseSystem& system, std::span<const PatternImage> patterns);
std::vector<PatternImage> scatter_patterns(const SparseSystem& system, const Eigen::VectorXd& p);

/// Coordinate-list dump: header "%%rows cols nnz", then "row col value" (0-based).
void write_coo(const SparseSystem& system, std::ostream& out);

}  // namespace depthproj
