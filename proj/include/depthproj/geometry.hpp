#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <optional>

#include "depthproj/common.hpp"

namespace depthproj {

template <typename Scalar>
struct Ray {
  Eigen::Matrix<Scalar, 3, 1> origin;
  Eigen::Matrix<Scalar, 3, 1> direction;  // unit length

  [[nodiscard]] Eigen::Matrix<Scalar, 3, 1> at(Scalar t) const { return origin + t * direction; }
};

using Ray3d = Ray<double>;

/// Ray parameter of the intersection with the plane through `point` with normal
/// `normal`, or nothing for parallel rays and hits at t <= eps.
template <typename Scalar>
std::optional<Scalar> intersect_plane(const Ray<Scalar>& ray,
                                      const Eigen::Matrix<Scalar, 3, 1>& point,
                                      const Eigen::Matrix<Scalar, 3, 1>& normal,
                                      Scalar eps = Scalar(1e-12)) {
  const Scalar denom = ray.direction.dot(normal);
  if (std::abs(denom) < std::numeric_limits<Scalar>::epsilon()) return std::nullopt;
  const Scalar t = (point - ray.origin).dot(normal) / denom;
  if (!(t > eps)) return std::nullopt;
  return t;
}

template <typename Scalar>
struct TriangleHit {
  Scalar t;
  Scalar u;  // barycentric weight of v1
  Scalar v;  // barycentric weight of v2
};

/// Moller-Trumbore, two-sided.
template <typename Scalar>
std::optional<TriangleHit<Scalar>> intersect_triangle(const Ray<Scalar>& ray,
                                                      const Eigen::Matrix<Scalar, 3, 1>& v0,
                                                      const Eigen::Matrix<Scalar, 3, 1>& v1,
                                                      const Eigen::Matrix<Scalar, 3, 1>& v2,
                                                      Scalar eps = Scalar(1e-12)) {
  const Eigen::Matrix<Scalar, 3, 1> e1 = v1 - v0;
  const Eigen::Matrix<Scalar, 3, 1> e2 = v2 - v0;
  const Eigen::Matrix<Scalar, 3, 1> p = ray.direction.cross(e2);
  const Scalar det = e1.dot(p);
  if (std::abs(det) < Scalar(1e-18)) return std::nullopt;
  const Scalar inv = Scalar(1) / det;
  const Eigen::Matrix<Scalar, 3, 1> s = ray.origin - v0;
  const Scalar u = s.dot(p) * inv;
  // Small slack so rays through shared edges are not lost between two cells.
  const Scalar slack = Scalar(1e-10);
  if (u < -slack || u > Scalar(1) + slack) return std::nullopt;
  const Eigen::Matrix<Scalar, 3, 1> q = s.cross(e1);
  const Scalar v = ray.direction.dot(q) * inv;
  if (v < -slack || u + v > Scalar(1) + slack) return std::nullopt;
  const Scalar t = e2.dot(q) * inv;
  if (!(t > eps)) return std::nullopt;
  return TriangleHit<Scalar>{t, u, v};
}

template <typename Derived>
bool is_rotation(const Eigen::MatrixBase<Derived>& r, double tol = 1e-9) {
  using Mat3 = Eigen::Matrix<typename Derived::Scalar, 3, 3>;
  const Mat3 m = r;
  return (m * m.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol && m.determinant() > 0;
}

/// Pinhole intrinsics in continuous pixel coordinates; pixel (x, y) covers
/// [x, x + 1) x [y, y + 1), so its center sits at (x + 0.5, y + 0.5).
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Shared model for the projectors and the calibration camera.
/// `pose` maps device coordinates (x right, y down, z forward) to world.
struct PinholeDevice {
  Resolution resolution;
  Intrinsics intrinsics;
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();

  [[nodiscard]] Eigen::Vector3d center() const { return pose.translation(); }

  [[nodiscard]] Eigen::Vector3d direction(const Eigen::Vector2d& pixel) const {
    const Eigen::Vector3d local((pixel.x() - intrinsics.cx) / intrinsics.fx,
                                (pixel.y() - intrinsics.cy) / intrinsics.fy, 1.0);
    return (pose.linear() * local).normalized();
  }

  [[nodiscard]] Ray3d ray(const Eigen::Vector2d& pixel) const { return {center(), direction(pixel)}; }

  [[nodiscard]] static Eigen::Vector2d pixel_center(int x, int y) { return {x + 0.5, y + 0.5}; }

  /// Continuous pixel coordinate of a world point, unless it lies behind the
  /// device or outside the raster.
  [[nodiscard]] std::optional<Eigen::Vector2d> project(const Eigen::Vector3d& world) const {
    const Eigen::Vector3d local = pose.inverse() * world;
    if (!(local.z() > 0.0)) return std::nullopt;
    const Eigen::Vector2d uv(intrinsics.fx * local.x() / local.z() + intrinsics.cx,
                             intrinsics.fy * local.y() / local.z() + intrinsics.cy);
    if (!(uv.x() >= 0.0 && uv.y() >= 0.0 && uv.x() < resolution.width && uv.y() < resolution.height)) {
      return std::nullopt;
    }
    return uv;
  }

  void validate(const char* what) const {
    if (resolution.width <= 0 || resolution.height <= 0) {
      throw std::invalid_argument(std::string(what) + ": resolution must be positive");
    }
    if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) {
      throw std::invalid_argument(std::string(what) + ": focal lengths must be positive");
    }
    if (!is_rotation(pose.linear())) {
      throw std::invalid_argument(std::string(what) + ": pose rotation is not orthonormal");
    }
  }
};

/// Rotation taking the device z axis onto `forward` with the device y axis as
/// close as possible to `down`.
inline Eigen::Matrix3d look_rotation(const Eigen::Vector3d& forward, const Eigen::Vector3d& down) {
  const Eigen::Vector3d z = forward.normalized();
  const Eigen::Vector3d x = down.cross(z).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = z;
  return r;
}

}  // namespace depthproj
