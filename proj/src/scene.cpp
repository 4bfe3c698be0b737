#include "depthproj/scene.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

namespace depthproj {

namespace {

struct LocalHit {
  double t;
  Eigen::Vector3d normal;  // world frame, unit
};

std::optional<LocalHit> intersect_surface(const PlaneGeometry& plane, const Ray3d& ray) {
  const auto t = intersect_plane(ray, plane.point, plane.normal);
  if (!t) return std::nullopt;
  return LocalHit{*t, plane.normal};
}

// Slab test against an axis-aligned box; returns the clipped [t0, t1].
std::optional<std::pair<double, double>> clip_box(const Ray3d& ray, const Eigen::Vector3d& lo,
                                                  const Eigen::Vector3d& hi) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const double o = ray.origin(k);
    const double d = ray.direction(k);
    if (std::abs(d) < 1e-300) {
      if (o < lo(k) || o > hi(k)) return std::nullopt;
      continue;
    }
    double a = (lo(k) - o) / d;
    double b = (hi(k) - o) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return std::nullopt;
  }
  return std::make_pair(t0, t1);
}

std::optional<LocalHit> intersect_surface(const SurfaceModel& surface, const HeightField& field,
                                          const Ray3d& world_ray) {
  const int w = field.width();
  const int h = field.height();
  const Eigen::Isometry3d local_from_world = field.world_from_local.inverse();
  const Ray3d ray{local_from_world * world_ray.origin, local_from_world.linear() * world_ray.direction};

  const auto& vn = surface.vertex_normals;
  if (vn.width != w || vn.height != h) throw std::logic_error("scene not prepared: missing depth-map normals");

  const double s = field.spacing;
  const Eigen::Vector3d lo(field.origin.x(), field.origin.y(), surface.depth_range.x());
  const Eigen::Vector3d hi(field.origin.x() + (w - 1) * s, field.origin.y() + (h - 1) * s,
                           surface.depth_range.y());
  const Eigen::Vector3d pad = Eigen::Vector3d::Constant(1e-9 * (1.0 + hi.cwiseAbs().maxCoeff()));
  const auto range = clip_box(ray, lo - pad, hi + pad);
  if (!range) return std::nullopt;
  const double t_end = range->second;
  const double t_start = range->first;

  auto grid_coord = [&](double tt, int axis) {
    return (ray.origin(axis) + tt * ray.direction(axis) - field.origin(axis)) / s;
  };
  int cell[2];
  int step[2];
  double t_max[2];
  double t_delta[2];
  for (int axis = 0; axis < 2; ++axis) {
    const int limit = (axis == 0 ? w : h) - 2;
    cell[axis] = std::clamp(static_cast<int>(std::floor(grid_coord(t_start, axis))), 0, limit);
    const double d = ray.direction(axis);
    if (std::abs(d) < 1e-300) {
      step[axis] = 0;
      t_max[axis] = std::numeric_limits<double>::infinity();
      t_delta[axis] = std::numeric_limits<double>::infinity();
    } else {
      step[axis] = d > 0 ? 1 : -1;
      const double boundary = field.origin(axis) + (cell[axis] + (d > 0 ? 1 : 0)) * s;
      t_max[axis] = (boundary - ray.origin(axis)) / d;
      t_delta[axis] = s / std::abs(d);
    }
  }

  while (true) {
    const int gx = cell[0];
    const int gy = cell[1];
    const Eigen::Vector3d v00 = field.local_vertex(gx, gy);
    const Eigen::Vector3d v10 = field.local_vertex(gx + 1, gy);
    const Eigen::Vector3d v11 = field.local_vertex(gx + 1, gy + 1);
    const Eigen::Vector3d v01 = field.local_vertex(gx, gy + 1);

    std::optional<LocalHit> best;
    auto consider = [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                        Eigen::Vector3d na, Eigen::Vector3d nb, Eigen::Vector3d nc) {
      const auto hit = intersect_triangle(ray, a, b, c);
      if (!hit || (best && hit->t >= best->t)) return;
      const Eigen::Vector3d n = ((1.0 - hit->u - hit->v) * na + hit->u * nb + hit->v * nc).normalized();
      best = LocalHit{hit->t, field.world_from_local.linear() * n};
    };
    consider(v00, v10, v11, vn.at(gx, gy), vn.at(gx + 1, gy), vn.at(gx + 1, gy + 1));
    consider(v00, v11, v01, vn.at(gx, gy), vn.at(gx + 1, gy + 1), vn.at(gx, gy + 1));
    if (best) return best;

    const int axis = t_max[0] < t_max[1] ? 0 : 1;
    if (!(t_max[axis] <= t_end)) break;
    cell[axis] += step[axis];
    const int limit = (axis == 0 ? w : h) - 2;
    if (cell[axis] < 0 || cell[axis] > limit) break;
    t_max[axis] += t_delta[axis];
  }
  return std::nullopt;
}

std::optional<LocalHit> intersect_surface(const SurfaceModel& surface, const Ray3d& ray) {
  if (const auto* plane = std::get_if<PlaneGeometry>(&surface.geometry)) {
    return intersect_surface(*plane, ray);
  }
  return intersect_surface(surface, std::get<HeightField>(surface.geometry), ray);
}

}  // namespace

std::optional<SurfaceHit> cast_ray(const SceneDescription& scene, const Ray3d& ray, std::optional<int> layer) {
  std::optional<LocalHit> best;
  int best_surface = -1;
  for (const auto& surface : scene.surfaces) {
    if (layer && surface.layer != *layer) continue;
    const auto hit = intersect_surface(surface, ray);
    if (!hit) continue;
    // Equal distances keep the lower surface id (surfaces are visited in id order).
    if (!best || hit->t < best->t - 1e-12 * std::max(1.0, best->t)) {
      best = hit;
      best_surface = surface.id;
    }
  }
  if (!best) return std::nullopt;
  SurfaceHit out;
  out.surface = best_surface;
  out.point = ray.at(best->t);
  out.normal = best->normal;
  out.distance = best->t;
  out.incident = -ray.direction;
  if (!(out.cosine() > 0.0)) return std::nullopt;
  return out;
}

std::optional<SurfaceHit> cast_projector_ray(const SceneDescription& scene, int projector,
                                             const Eigen::Vector2d& pixel, std::optional<int> layer) {
  const auto& device = scene.projectors.at(static_cast<std::size_t>(projector)).device;
  if (!(pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= device.resolution.width &&
        pixel.y() <= device.resolution.height)) {
    throw std::out_of_range("projector pixel outside the raster");
  }
  return cast_ray(scene, device.ray(pixel), layer);
}

std::optional<SurfaceHit> cast_camera_ray(const SceneDescription& scene, const Eigen::Vector2d& pixel,
                                          std::optional<int> layer) {
  return cast_ray(scene, scene.camera.device.ray(pixel), layer);
}

std::optional<Eigen::Vector2d> project_to_camera(const SceneDescription& scene, const Eigen::Vector3d& world) {
  if (!world.allFinite()) return std::nullopt;
  return scene.camera.device.project(world);
}

bool is_lit_by(const SceneDescription& scene, int projector, const Eigen::Vector3d& point, int layer,
               double tolerance) {
  const auto& device = scene.projectors.at(static_cast<std::size_t>(projector)).device;
  const auto uv = device.project(point);
  if (!uv) return false;
  const auto hit = cast_ray(scene, device.ray(*uv), layer);
  if (!hit) return false;
  const double dist = (point - device.center()).norm();
  return (hit->point - point).norm() <= tolerance * (1.0 + dist);
}

NormalField grid_normals(const std::vector<Eigen::Vector3d>& vertices, int width, int height) {
  NormalField field;
  field.width = width;
  field.height = height;
  field.normals.resize(static_cast<Eigen::Index>(width) * height, 3);
  std::vector<char> valid(vertices.size(), 0);
  auto vertex = [&](int x, int y) -> const Eigen::Vector3d& {
    return vertices[static_cast<std::size_t>(y) * width + x];
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int x0 = std::max(x - 1, 0), x1 = std::min(x + 1, width - 1);
      const int y0 = std::max(y - 1, 0), y1 = std::min(y + 1, height - 1);
      const Eigen::Vector3d du = vertex(x1, y) - vertex(x0, y);
      const Eigen::Vector3d dv = vertex(x, y1) - vertex(x, y0);
      Eigen::Vector3d n = du.cross(dv);
      const double len = n.norm();
      const auto idx = static_cast<Eigen::Index>(y) * width + x;
      if (len > 1e-15 * std::max(1.0, du.norm() * dv.norm()) && std::isfinite(len)) {
        n /= len;
        if (n.z() > 0.0) n = -n;
        field.normals.row(idx) = n.transpose();
        valid[static_cast<std::size_t>(idx)] = 1;
      }
    }
  }

  // Multi-source BFS from valid samples propagates the nearest valid normal.
  std::deque<Eigen::Index> frontier;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(valid.size()); ++i) {
    if (valid[static_cast<std::size_t>(i)]) frontier.push_back(i);
  }
  if (frontier.empty()) {
    field.normals.rowwise() = Eigen::RowVector3d(0, 0, -1);
    return field;
  }
  while (!frontier.empty()) {
    const Eigen::Index i = frontier.front();
    frontier.pop_front();
    const int x = static_cast<int>(i % width);
    const int y = static_cast<int>(i / width);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
        const auto j = static_cast<Eigen::Index>(ny) * width + nx;
        if (valid[static_cast<std::size_t>(j)]) continue;
        valid[static_cast<std::size_t>(j)] = 1;
        field.normals.row(j) = field.normals.row(i);
        frontier.push_back(j);
      }
    }
  }
  return field;
}

NormalField compute_normals(const SurfaceModel& surface) {
  if (const auto* plane = std::get_if<PlaneGeometry>(&surface.geometry)) {
    NormalField field;
    field.width = field.height = 1;
    field.normals.resize(1, 3);
    field.normals.row(0) = plane->normal.transpose();
    return field;
  }
  const auto& hf = std::get<HeightField>(surface.geometry);
  std::vector<Eigen::Vector3d> vertices;
  vertices.reserve(static_cast<std::size_t>(hf.width()) * hf.height());
  for (int y = 0; y < hf.height(); ++y) {
    for (int x = 0; x < hf.width(); ++x) vertices.push_back(hf.local_vertex(x, y));
  }
  NormalField field = grid_normals(vertices, hf.width(), hf.height());
  field.normals = field.normals * hf.world_from_local.linear().transpose();
  return field;
}

void SceneDescription::validate() const {
  camera.device.validate("camera");
  for (std::size_t j = 0; j < projectors.size(); ++j) {
    const auto& p = projectors[j];
    if (p.id != static_cast<int>(j)) throw std::invalid_argument("projector ids must equal their index");
    p.device.validate("projector");
    if (p.gamma.empty()) throw std::invalid_argument("projector needs a gamma model");
    for (const auto& g : p.gamma) {
      if (!g.is_monotone()) throw std::invalid_argument("projector gamma must have a > 0 and b > 0");
    }
  }
  for (std::size_t k = 0; k < surfaces.size(); ++k) {
    const auto& s = surfaces[k];
    if (s.id != static_cast<int>(k)) throw std::invalid_argument("surface ids must equal their index");
    if (!(s.albedo > 0.0 && s.albedo <= 1.0)) throw std::invalid_argument("surface albedo must lie in (0, 1]");
    if (const auto* plane = std::get_if<PlaneGeometry>(&s.geometry)) {
      if (std::abs(plane->normal.norm() - 1.0) > 1e-9) throw std::invalid_argument("plane normal must be unit length");
      if (!plane->point.allFinite()) throw std::invalid_argument("plane point must be finite");
    } else {
      const auto& hf = std::get<HeightField>(s.geometry);
      if (hf.width() < 2 || hf.height() < 2) throw std::invalid_argument("depth map needs at least 2x2 samples");
      if (!hf.depths.allFinite() || !(hf.depths.minCoeff() > 0.0)) {
        throw std::invalid_argument("depth map entries must be finite and positive");
      }
      if (!(hf.spacing > 0.0)) throw std::invalid_argument("depth map spacing must be positive");
      if (!is_rotation(hf.world_from_local.linear())) throw std::invalid_argument("depth map frame is not rigid");
    }
  }
  std::vector<int> bound(surfaces.size(), 0);
  for (const auto& t : targets) {
    if (t.surface < 0 || t.surface >= static_cast<int>(surfaces.size())) {
      throw std::invalid_argument("target references unknown surface " + std::to_string(t.surface));
    }
    ++bound[static_cast<std::size_t>(t.surface)];
  }
  for (std::size_t k = 0; k < bound.size(); ++k) {
    if (bound[k] != 1) {
      throw std::invalid_argument("surface " + std::to_string(k) + " needs exactly one target binding");
    }
  }
  bounds.validate();
  if (!(reference_distance > 0.0)) throw std::invalid_argument("reference distance must be positive");
  if (!(calibration.contrast_floor >= 0.0) || calibration.hole_fill_quorum < 1 ||
      calibration.hole_fill_quorum > 8 || calibration.hole_fill_iterations < 0) {
    throw std::invalid_argument("invalid calibration settings");
  }
}

void SceneDescription::prepare() {
  validate();
  for (auto& s : surfaces) {
    if (const auto* hf = std::get_if<HeightField>(&s.geometry)) {
      std::vector<Eigen::Vector3d> vertices;
      for (int y = 0; y < hf->height(); ++y) {
        for (int x = 0; x < hf->width(); ++x) vertices.push_back(hf->local_vertex(x, y));
      }
      s.vertex_normals = grid_normals(vertices, hf->width(), hf->height());
      s.depth_range = {hf->depths.minCoeff(), hf->depths.maxCoeff()};
    }
  }
}

std::vector<int> SceneDescription::layers() const {
  std::set<int> ls;
  for (const auto& s : surfaces) ls.insert(s.layer);
  return {ls.begin(), ls.end()};
}

const TargetBinding& SceneDescription::target_for(int surface) const {
  for (const auto& t : targets) {
    if (t.surface == surface) return t;
  }
  throw std::out_of_range("no target bound to surface " + std::to_string(surface));
}

}  // namespace depthproj
