#pragma once

#include <Eigen/Geometry>

#include <vector>

#include "depthproj/scene.hpp"

namespace fixture {

inline depthproj::PinholeDevice device(int w, int h, double f, const Eigen::Isometry3d& pose = Eigen::Isometry3d::Identity()) {
  depthproj::PinholeDevice d;
  d.resolution = {w, h};
  d.intrinsics = {f, f, 0.5 * w, 0.5 * h};
  d.pose = pose;
  return d;
}

inline Eigen::Isometry3d at(const Eigen::Vector3d& t, const Eigen::Matrix3d& r = Eigen::Matrix3d::Identity()) {
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();
  pose.linear() = r;
  pose.translation() = t;
  return pose;
}

inline depthproj::SurfaceModel plane(int id, const Eigen::Vector3d& point, const Eigen::Vector3d& normal, int layer = 0) {
  depthproj::SurfaceModel s;
  s.id = id;
  s.layer = layer;
  s.geometry = depthproj::PlaneGeometry{point, normal.normalized()};
  return s;
}

inline depthproj::SurfaceModel height_field(int id, depthproj::Raster<double> depths, Eigen::Vector2d origin, double spacing,
                                            int layer = 0) {
  depthproj::SurfaceModel s;
  s.id = id;
  s.layer = layer;
  depthproj::HeightField hf;
  hf.depths = std::move(depths);
  hf.origin = origin;
  hf.spacing = spacing;
  s.geometry = hf;
  return s;
}

/// Projectors and camera as given, one constant target per surface; prepared.
inline depthproj::SceneDescription scene(std::vector<depthproj::PinholeDevice> projectors,
                                         std::vector<depthproj::SurfaceModel> surfaces,
                                         const depthproj::PinholeDevice& camera) {
  depthproj::SceneDescription s;
  for (std::size_t j = 0; j < projectors.size(); ++j) {
    depthproj::ProjectorModel p;
    p.id = static_cast<int>(j);
    p.device = projectors[j];
    s.projectors.push_back(p);
  }
  s.surfaces = std::move(surfaces);
  s.camera.device = camera;
  for (const auto& surf : s.surfaces) s.targets.push_back({surf.id, "procedural:constant:128"});
  s.prepare();
  return s;
}

}  // namespace fixture
