#include "depthproj/system.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "depthproj/parallel.hpp"

namespace depthproj {

InverseProjectionMap::InverseProjectionMap(int projector_count, int surface_count, Resolution camera)
    : projector_count_(projector_count), camera_(camera) {
  sample_index_.assign(static_cast<std::size_t>(surface_count),
                       Raster<std::int32_t>::Constant(camera.height, camera.width, -1));
}

std::size_t InverseProjectionMap::add_sample(SurfaceSample sample) {
  const std::size_t index = samples_.size();
  auto& slot = sample_index_.at(static_cast<std::size_t>(sample.surface)).data()[sample.camera_index];
  if (slot >= 0) throw std::logic_error("duplicate surface sample");
  slot = static_cast<std::int32_t>(index);
  samples_.push_back(sample);
  links_.resize(links_.size() + static_cast<std::size_t>(projector_count_));
  return index;
}

std::int64_t InverseProjectionMap::sample_at(int surface, int camera_index) const {
  return sample_index_.at(static_cast<std::size_t>(surface)).data()[camera_index];
}

std::int32_t InverseProjectionMap::q(int surface, int camera_index, int projector) const {
  const auto s = sample_at(surface, camera_index);
  if (s < 0) return 0;
  return links(static_cast<std::size_t>(s))[static_cast<std::size_t>(projector)].pixel;
}

InverseProjectionMap build_inverse_projection(const SceneDescription& scene,
                                              std::span<const CorrespondenceMap> maps, int threads) {
  const auto& camera = scene.camera.device;
  const Resolution cres = camera.resolution;
  const int J = static_cast<int>(scene.projectors.size());
  InverseProjectionMap q(J, static_cast<int>(scene.surfaces.size()), cres);

  for (const auto& m : maps) {
    if (!(m.camera == cres)) throw std::invalid_argument("correspondence map built for a different camera");
  }

  struct PixelHit {
    int surface = -1;
    Eigen::Vector3d point;
    Eigen::Vector3d normal;
  };
  for (const int layer : scene.layers()) {
    std::vector<const CorrespondenceMap*> by_projector(static_cast<std::size_t>(J), nullptr);
    for (const auto& m : maps) {
      if (m.layer == layer && m.projector >= 0 && m.projector < J) by_projector[static_cast<std::size_t>(m.projector)] = &m;
    }
    std::vector<PixelHit> hits(static_cast<std::size_t>(cres.pixel_count()));
    parallel_for(0, cres.height, threads, [&](std::ptrdiff_t y) {
      for (int x = 0; x < cres.width; ++x) {
        const auto hit = cast_camera_ray(scene, PinholeDevice::pixel_center(x, static_cast<int>(y)), layer);
        if (!hit) continue;
        auto& out = hits[static_cast<std::size_t>(y) * cres.width + x];
        out.surface = hit->surface;
        out.point = hit->point;
        out.normal = hit->normal;
      }
    });
    for (int idx = 0; idx < static_cast<int>(hits.size()); ++idx) {
      const auto& hit = hits[static_cast<std::size_t>(idx)];
      if (hit.surface < 0) continue;
      const auto s = q.add_sample({hit.surface, idx});
      auto links = q.links(s);
      const int x = idx % cres.width;
      const int y = idx / cres.width;
      for (int j = 0; j < J; ++j) {
        const auto* map = by_projector[static_cast<std::size_t>(j)];
        if (!map) continue;
        const auto f = map->forward(x, y);
        if (!f) continue;
        const Eigen::Vector3d to_projector = scene.projectors[static_cast<std::size_t>(j)].device.center() - hit.point;
        const double d = to_projector.norm();
        const double cosine = hit.normal.dot(to_projector) / d;
        if (!(cosine > 0.0) || !(d > 0.0)) continue;
        auto& link = links[static_cast<std::size_t>(j)];
        link.pixel = f->y() * map->projector_resolution.width + f->x() + 1;
        link.distance = d;
        link.cosine = cosine;
      }
    }
  }
  return q;
}

double attenuation_weight(double distance, double cosine) {
  if (!(cosine > 0.0)) throw std::domain_error("attenuation weight needs L.N > 0 (back faces are culled)");
  if (!(distance > 0.0)) throw std::domain_error("attenuation weight needs a positive distance");
  return distance * distance / cosine;
}

double link_weight(const ProjectorLink& link, double albedo, Convention convention, double reference_distance) {
  if (link.pixel == 0) return 0.0;
  const double d = link.distance / reference_distance;
  if (convention == Convention::Verbatim) return albedo * attenuation_weight(d, link.cosine);
  return albedo / attenuation_weight(d, link.cosine);
}

namespace {

const TargetImage& target_of(std::span<const TargetImage> targets, int surface) {
  for (const auto& t : targets) {
    if (t.surface == surface) return t;
  }
  throw std::invalid_argument("no target image for surface " + std::to_string(surface));
}

}  // namespace

SparseSystem assemble(const SceneDescription& scene, const InverseProjectionMap& q,
                      std::span<const TargetImage> targets, Convention convention) {
  const int J = q.projector_count();
  SparseSystem sys;
  sys.convention = convention;
  sys.column_offsets.push_back(0);
  for (const auto& p : scene.projectors) {
    sys.projector_resolutions.push_back(p.device.resolution);
    sys.column_offsets.push_back(sys.column_offsets.back() + p.device.resolution.pixel_count());
  }
  const Resolution cres = q.camera();
  for (const auto& t : targets) {
    if (t.pixels.rows() != cres.height || t.pixels.cols() != cres.width) {
      throw std::invalid_argument("target image dimensions must match the camera");
    }
  }

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(q.samples().size() * static_cast<std::size_t>(J));
  std::vector<double> rhs;
  rhs.reserve(q.samples().size());
  for (std::size_t s = 0; s < q.samples().size(); ++s) {
    const auto& sample = q.samples()[s];
    const double albedo = scene.surfaces.at(static_cast<std::size_t>(sample.surface)).albedo;
    const auto links = q.links(s);
    const auto row = static_cast<Eigen::Index>(sys.rows.size());
    int count = 0;
    for (int j = 0; j < J; ++j) {
      const auto& link = links[static_cast<std::size_t>(j)];
      if (link.pixel == 0) continue;
      const double w = link_weight(link, albedo, convention, scene.reference_distance);
      if (!(w > 0.0) || !std::isfinite(w)) throw Error("non-finite attenuation weight");
      entries.emplace_back(row, sys.column_offsets[static_cast<std::size_t>(j)] + link.pixel - 1, w);
      ++count;
    }
    const RowInfo info{sample.surface, sample.camera_index};
    if (count == 0) {
      sys.infeasible.push_back(info);
      continue;
    }
    sys.rows.push_back(info);
    rhs.push_back(target_of(targets, sample.surface).pixels.data()[sample.camera_index]);
  }
  if (sys.rows.empty()) throw Error("every target pixel is unlit: nothing to solve");
  sys.matrix.resize(static_cast<Eigen::Index>(sys.rows.size()), sys.cols());
  sys.matrix.setFromTriplets(entries.begin(), entries.end());
  sys.rhs = Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  return sys;
}

Eigen::VectorXd gather_rhs(const SparseSystem& system, std::span<const TargetImage> targets) {
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(system.rows.size()));
  for (std::size_t r = 0; r < system.rows.size(); ++r) {
    const auto& info = system.rows[r];
    rhs(static_cast<Eigen::Index>(r)) = target_of(targets, info.surface).pixels.data()[info.camera_index];
  }
  return rhs;
}

Eigen::VectorXd flatten_patterns(const SparseSystem& system, std::span<const PatternImage> patterns) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(system.cols());
  for (const auto& pat : patterns) {
    const auto j = static_cast<std::size_t>(pat.projector);
    const auto& res = system.projector_resolutions.at(j);
    if (pat.pixels.rows() != res.height || pat.pixels.cols() != res.width) {
      throw std::invalid_argument("pattern does not match the projector resolution");
    }
    p.segment(system.column_offsets[j], res.pixel_count()) =
        Eigen::Map<const Eigen::VectorXd>(pat.pixels.data(), res.pixel_count());
  }
  return p;
}

std::vector<PatternImage> scatter_patterns(const SparseSystem& system, const Eigen::VectorXd& p) {
  std::vector<PatternImage> out;
  for (int j = 0; j < system.projector_count(); ++j) {
    const auto& res = system.projector_resolutions[static_cast<std::size_t>(j)];
    PatternImage pat{j, Image(res.height, res.width)};
    Eigen::Map<Eigen::VectorXd>(pat.pixels.data(), res.pixel_count()) =
        p.segment(system.column_offsets[static_cast<std::size_t>(j)], res.pixel_count());
    out.push_back(std::move(pat));
  }
  return out;
}

void write_coo(const SparseSystem& system, std::ostream& out) {
  out << "%%" << system.matrix.rows() << ' ' << system.matrix.cols() << ' ' << system.matrix.nonZeros() << '\n';
  out.precision(17);
  for (Eigen::Index r = 0; r < system.matrix.outerSize(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(system.matrix, r); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

}  // namespace depthproj
