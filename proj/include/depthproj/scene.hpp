#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "depthproj/common.hpp"
#include "depthproj/gamma.hpp"
#include "depthproj/geometry.hpp"

namespace depthproj {

struct ProjectorModel {
  int id = 0;
  PinholeDevice device;
  /// One response per color channel; a single entry applies to all channels.
  std::vector<GammaModel> gamma{GammaModel{}};

  [[nodiscard]] const GammaModel& response(int channel) const {
    return gamma.size() == 1 ? gamma.front() : gamma.at(static_cast<std::size_t>(channel));
  }
};

struct VirtualCamera {
  PinholeDevice device;
};

struct PlaneGeometry {
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
};

/// Per-sample unit normals over a grid (1x1 for planes).
struct NormalField {
  int width = 0;
  int height = 0;
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> normals;

  [[nodiscard]] Eigen::Vector3d at(int x, int y) const {
    return normals.row(static_cast<Eigen::Index>(y) * width + x).transpose();
  }
};

/// Height field sampled on a regular grid in a local frame: vertex (gx, gy)
/// sits at (origin.x + gx * spacing, origin.y + gy * spacing, depths(gy, gx)).
/// The local frame is the calibration camera frame unless stated otherwise.
struct HeightField {
  Raster<double> depths;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  double spacing = 1.0;
  Eigen::Isometry3d world_from_local = Eigen::Isometry3d::Identity();

  [[nodiscard]] int width() const { return static_cast<int>(depths.cols()); }
  [[nodiscard]] int height() const { return static_cast<int>(depths.rows()); }
  [[nodiscard]] Eigen::Vector3d local_vertex(int gx, int gy) const {
    return {origin.x() + gx * spacing, origin.y() + gy * spacing, depths(gy, gx)};
  }
};

struct SurfaceModel {
  int id = 0;
  /// Surfaces on the same layer coexist and occlude each other. Distinct layers
  /// are alternative placements of the screen, each observed on its own.
  int layer = 0;
  double albedo = 1.0;
  std::variant<PlaneGeometry, HeightField> geometry;
  /// Cached vertex normals of a height field (local frame); filled by prepare().
  NormalField vertex_normals;
  Eigen::Vector2d depth_range = Eigen::Vector2d::Zero();

  [[nodiscard]] bool is_plane() const { return std::holds_alternative<PlaneGeometry>(geometry); }
};

struct TargetBinding {
  int surface = 0;
  /// Image file path, or "procedural:<kind>[:<seed>]".
  std::string source;
};

struct CalibrationSettings {
  double contrast_floor = 0.02;
  int hole_fill_quorum = 5;
  int hole_fill_iterations = 10;
};

struct SceneDescription {
  std::vector<ProjectorModel> projectors;
  std::vector<SurfaceModel> surfaces;
  VirtualCamera camera;
  std::vector<TargetBinding> targets;
  SolverBounds bounds;
  /// Distance at which a fronto-parallel surface receives unit attenuation weight.
  double reference_distance = 1.0;
  CalibrationSettings calibration;

  /// Checks every invariant and caches derived data (normals). Throws on error.
  void prepare();
  void validate() const;

  [[nodiscard]] std::vector<int> layers() const;
  [[nodiscard]] const TargetBinding& target_for(int surface) const;
};

struct SurfaceHit {
  int surface = -1;
  Eigen::Vector3d point;
  Eigen::Vector3d normal;
  double distance = 0.0;
  /// Unit vector from the hit point back to the ray origin.
  Eigen::Vector3d incident;

  [[nodiscard]] double cosine() const { return incident.dot(normal); }
};

/// Nearest front-facing hit along `ray` among surfaces of `layer` (all surfaces
/// when no layer is given). A back-facing nearest hit blocks the ray.
std::optional<SurfaceHit> cast_ray(const SceneDescription& scene, const Ray3d& ray,
                                   std::optional<int> layer = std::nullopt);

std::optional<SurfaceHit> cast_projector_ray(const SceneDescription& scene, int projector,
                                             const Eigen::Vector2d& pixel,
                                             std::optional<int> layer = std::nullopt);

std::optional<SurfaceHit> cast_camera_ray(const SceneDescription& scene, const Eigen::Vector2d& pixel,
                                          std::optional<int> layer = std::nullopt);

std::optional<Eigen::Vector2d> project_to_camera(const SceneDescription& scene, const Eigen::Vector3d& world);

/// True when `point` (on a surface of `layer`) receives direct light from the projector.
bool is_lit_by(const SceneDescription& scene, int projector, const Eigen::Vector3d& point, int layer,
               double tolerance = 1e-6);

/// World-frame unit normals for every sample of the surface. Height-field
/// normals use central differences (one-sided at borders) and face the local
/// origin (toward the camera).
NormalField compute_normals(const SurfaceModel& surface);

/// Normals of a grid of vertices laid out row-major (width x height). Cells
/// without a usable cross product take the nearest valid normal.
NormalField grid_normals(const std::vector<Eigen::Vector3d>& vertices, int width, int height);

}  // namespace depthproj
