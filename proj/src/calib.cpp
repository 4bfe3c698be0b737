#include "depthproj/calib.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <tuple>

#include "depthproj/parallel.hpp"

namespace depthproj {

int gray_bit_count(int extent) {
  int bits = 1;
  while ((1LL << bits) < extent) ++bits;
  return bits;
}

GrayCodeSequence make_gray_code(Resolution projector, Axis axis) {
  GrayCodeSequence seq;
  seq.axis = axis;
  seq.bits = gray_bit_count(axis == Axis::X ? projector.width : projector.height);
  for (int b = 0; b < seq.bits; ++b) {
    Raster<std::uint8_t> frame(projector.height, projector.width);
    for (int y = 0; y < projector.height; ++y) {
      for (int x = 0; x < projector.width; ++x) {
        const auto coord = static_cast<std::uint32_t>(axis == Axis::X ? x : y);
        frame(y, x) = ((gray_encode(coord) >> b) & 1u) ? 255 : 0;
      }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

CaptureModel build_capture_model(const SceneDescription& scene, int projector, int layer, int threads) {
  const auto& camera = scene.camera.device;
  const auto& proj = scene.projectors.at(static_cast<std::size_t>(projector)).device;
  CaptureModel model;
  model.projector = projector;
  model.layer = layer;
  model.camera = camera.resolution;
  model.projector_resolution = proj.resolution;
  model.source.assign(static_cast<std::size_t>(camera.resolution.pixel_count()), -1);
  model.gain.assign(model.source.size(), 0.0);

  parallel_for(0, camera.resolution.height, threads, [&](std::ptrdiff_t y) {
    for (int x = 0; x < camera.resolution.width; ++x) {
      const auto hit = cast_camera_ray(scene, PinholeDevice::pixel_center(x, static_cast<int>(y)), layer);
      if (!hit) continue;
      const auto uv = proj.project(hit->point);
      if (!uv) continue;
      const auto lit = cast_ray(scene, proj.ray(*uv), layer);
      if (!lit || (lit->point - hit->point).norm() > 1e-6 * (1.0 + lit->distance)) continue;
      const int px = static_cast<int>(std::floor(uv->x()));
      const int py = static_cast<int>(std::floor(uv->y()));
      const double albedo = scene.surfaces[static_cast<std::size_t>(hit->surface)].albedo;
      const double d = lit->distance;
      const auto idx = static_cast<std::size_t>(y) * camera.resolution.width + x;
      model.source[idx] = py * proj.resolution.width + px;
      model.gain[idx] = albedo * lit->cosine() / (d * d);
    }
  });
  return model;
}

Image simulate_capture(const CaptureModel& model, const Image& pattern) {
  if (pattern.rows() != model.projector_resolution.height || pattern.cols() != model.projector_resolution.width) {
    throw std::invalid_argument("pattern does not match the projector resolution");
  }
  Image out = Image::Zero(model.camera.height, model.camera.width);
  const double* src = pattern.data();
  double* dst = out.data();
  for (std::size_t i = 0; i < model.source.size(); ++i) {
    if (model.source[i] >= 0) dst[i] = src[model.source[i]] * model.gain[i];
  }
  return out;
}

Image simulate_capture(const SceneDescription& scene, int projector, const Image& pattern, int layer, int threads) {
  return simulate_capture(build_capture_model(scene, projector, layer, threads), pattern);
}

CorrespondenceMap::CorrespondenceMap(int projector_, int layer_, Resolution camera_, Resolution projector_res)
    : projector(projector_),
      layer(layer_),
      camera(camera_),
      projector_resolution(projector_res),
      forward_x(Raster<std::int32_t>::Constant(camera_.height, camera_.width, kUndefined)),
      forward_y(Raster<std::int32_t>::Constant(camera_.height, camera_.width, kUndefined)),
      inverse_x(Raster<std::int32_t>::Constant(projector_res.height, projector_res.width, kUndefined)),
      inverse_y(Raster<std::int32_t>::Constant(projector_res.height, projector_res.width, kUndefined)) {}

std::optional<Eigen::Vector2i> CorrespondenceMap::forward(int x, int y) const {
  if (forward_x(y, x) == kUndefined) return std::nullopt;
  return Eigen::Vector2i(forward_x(y, x), forward_y(y, x));
}

std::optional<Eigen::Vector2i> CorrespondenceMap::inverse(int x, int y) const {
  if (inverse_x(y, x) == kUndefined) return std::nullopt;
  return Eigen::Vector2i(inverse_x(y, x), inverse_y(y, x));
}

Eigen::Index CorrespondenceMap::defined_count() const { return (forward_x.array() != kUndefined).count(); }

void CorrespondenceMap::rebuild_inverse() {
  inverse_x.setConstant(kUndefined);
  inverse_y.setConstant(kUndefined);
  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const auto px = forward_x(y, x);
      if (px == kUndefined) continue;
      const auto py = forward_y(y, x);
      if (inverse_x(py, px) != kUndefined) continue;
      inverse_x(py, px) = x;
      inverse_y(py, px) = y;
    }
  }
}

CorrespondenceMap geometric_correspondences(const SceneDescription& scene, int projector, int layer, int threads) {
  const auto model = build_capture_model(scene, projector, layer, threads);
  CorrespondenceMap map(projector, layer, model.camera, model.projector_resolution);
  const int pw = model.projector_resolution.width;
  for (std::size_t i = 0; i < model.source.size(); ++i) {
    if (model.source[i] < 0) continue;
    map.forward_x.data()[i] = model.source[i] % pw;
    map.forward_y.data()[i] = model.source[i] / pw;
  }
  map.rebuild_inverse();
  return map;
}

CorrespondenceMap decode_correspondences(const SceneDescription& scene, int projector, int layer,
                                         const CalibrationSettings& settings, int threads) {
  const auto model = build_capture_model(scene, projector, layer, threads);
  const Resolution pres = model.projector_resolution;

  const Image white = simulate_capture(model, Image::Constant(pres.height, pres.width, 255.0));
  const Image black = simulate_capture(model, Image::Zero(pres.height, pres.width));
  const double floor = settings.contrast_floor * white.maxCoeff();
  const Image threshold = 0.5 * (white + black);

  auto decode_axis = [&](Axis axis) {
    const auto seq = make_gray_code(pres, axis);
    Raster<std::uint32_t> code = Raster<std::uint32_t>::Zero(model.camera.height, model.camera.width);
    for (int b = 0; b < seq.bits; ++b) {
      const Image captured = simulate_capture(model, seq.frames[static_cast<std::size_t>(b)].cast<double>());
      code.array() += ((captured.array() > threshold.array()).cast<std::uint32_t>()) * (1u << b);
    }
    return code;
  };
  const auto code_x = decode_axis(Axis::X);
  const auto code_y = decode_axis(Axis::Y);

  CorrespondenceMap map(projector, layer, model.camera, pres);
  for (int y = 0; y < model.camera.height; ++y) {
    for (int x = 0; x < model.camera.width; ++x) {
      const double contrast = white(y, x) - black(y, x);
      if (!(contrast > floor) || contrast <= 0.0) continue;
      const auto px = static_cast<std::int64_t>(gray_decode(code_x(y, x)));
      const auto py = static_cast<std::int64_t>(gray_decode(code_y(y, x)));
      if (px >= pres.width || py >= pres.height) continue;
      map.forward_x(y, x) = static_cast<std::int32_t>(px);
      map.forward_y(y, x) = static_cast<std::int32_t>(py);
    }
  }
  if (map.defined_count() == 0) {
    throw Error("no camera pixel decoded for projector " + std::to_string(projector) + " on layer " +
                std::to_string(layer) + ": degenerate scene");
  }
  map.rebuild_inverse();
  return map;
}

CorrespondenceMap fill_holes(const CorrespondenceMap& map, HoleFillSettings settings) {
  CorrespondenceMap out = map;
  const int w = map.camera.width;
  const int h = map.camera.height;
  std::vector<std::pair<int, int>> filled;
  for (int iter = 0; iter < settings.max_iterations; ++iter) {
    const Raster<std::int32_t> fx = out.forward_x;
    const Raster<std::int32_t> fy = out.forward_y;
    bool changed = false;
    std::array<std::int32_t, 8> xs{}, ys{};
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (fx(y, x) != kUndefined) continue;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || fx(ny, nx) == kUndefined) continue;
            xs[static_cast<std::size_t>(n)] = fx(ny, nx);
            ys[static_cast<std::size_t>(n)] = fy(ny, nx);
            ++n;
          }
        }
        if (n < settings.quorum) continue;
        const auto mid = static_cast<std::ptrdiff_t>((n - 1) / 2);
        std::nth_element(xs.begin(), xs.begin() + mid, xs.begin() + n);
        std::nth_element(ys.begin(), ys.begin() + mid, ys.begin() + n);
        out.forward_x(y, x) = xs[static_cast<std::size_t>(mid)];
        out.forward_y(y, x) = ys[static_cast<std::size_t>(mid)];
        filled.emplace_back(x, y);
        changed = true;
      }
    }
    if (!changed) break;
  }
  // Filled pixels only claim projector pixels that had no inverse entry yet.
  std::sort(filled.begin(), filled.end(), [](const auto& l, const auto& r) {
    return std::tie(l.second, l.first) < std::tie(r.second, r.first);
  });
  for (const auto& [x, y] : filled) {
    const auto px = out.forward_x(y, x);
    const auto py = out.forward_y(y, x);
    if (out.inverse_x(py, px) != kUndefined) continue;
    out.inverse_x(py, px) = x;
    out.inverse_y(py, px) = y;
  }
  return out;
}

namespace {

constexpr std::uint16_t kSentinel = 0xFFFF;
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF)};
  out.write(b, 2);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("truncated correspondence map");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2)) throw Error("truncated correspondence map");
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

void put_raster_pair(std::ostream& out, const Raster<std::int32_t>& xs, const Raster<std::int32_t>& ys) {
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    const bool undefined = xs.data()[i] == kUndefined;
    put_u16(out, undefined ? kSentinel : static_cast<std::uint16_t>(xs.data()[i]));
    put_u16(out, undefined ? kSentinel : static_cast<std::uint16_t>(ys.data()[i]));
  }
}

void get_raster_pair(std::istream& in, Raster<std::int32_t>& xs, Raster<std::int32_t>& ys, Resolution bound) {
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    const auto x = get_u16(in);
    const auto y = get_u16(in);
    if (x == kSentinel || y == kSentinel) continue;
    if (!bound.contains(x, y)) throw Error("correspondence entry outside its raster");
    xs.data()[i] = x;
    ys.data()[i] = y;
  }
}

}  // namespace

void write_correspondence_map(const CorrespondenceMap& map, std::ostream& out) {
  if (map.camera.width >= kSentinel || map.camera.height >= kSentinel ||
      map.projector_resolution.width >= kSentinel || map.projector_resolution.height >= kSentinel) {
    throw Error("raster too large for 16-bit correspondence coordinates");
  }
  out.write("DPCM", 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(map.projector));
  put_u32(out, static_cast<std::uint32_t>(map.layer));
  put_u32(out, static_cast<std::uint32_t>(map.camera.width));
  put_u32(out, static_cast<std::uint32_t>(map.camera.height));
  put_u32(out, static_cast<std::uint32_t>(map.projector_resolution.width));
  put_u32(out, static_cast<std::uint32_t>(map.projector_resolution.height));
  put_raster_pair(out, map.forward_x, map.forward_y);
  put_raster_pair(out, map.inverse_x, map.inverse_y);
  if (!out) throw Error("failed writing correspondence map");
}

CorrespondenceMap read_correspondence_map(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "DPCM") throw Error("not a correspondence map file");
  if (get_u32(in) != kVersion) throw Error("unsupported correspondence map version");
  const auto projector = static_cast<int>(get_u32(in));
  const auto layer = static_cast<int>(get_u32(in));
  Resolution cam{static_cast<int>(get_u32(in)), 0};
  cam.height = static_cast<int>(get_u32(in));
  Resolution proj{static_cast<int>(get_u32(in)), 0};
  proj.height = static_cast<int>(get_u32(in));
  if (cam.width <= 0 || cam.height <= 0 || proj.width <= 0 || proj.height <= 0 || cam.width >= kSentinel ||
      cam.height >= kSentinel || proj.width >= kSentinel || proj.height >= kSentinel) {
    throw Error("invalid correspondence map dimensions");
  }
  CorrespondenceMap map(projector, layer, cam, proj);
  get_raster_pair(in, map.forward_x, map.forward_y, proj);
  get_raster_pair(in, map.inverse_x, map.inverse_y, cam);
  return map;
}

void write_correspondence_map(const CorrespondenceMap& map, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_correspondence_map(map, out);
}

CorrespondenceMap read_correspondence_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_correspondence_map(in);
}

void dump_correspondence_map(const CorrespondenceMap& map, std::ostream& out) {
  out << "# projector " << map.projector << " layer " << map.layer << " camera " << map.camera.width << "x"
      << map.camera.height << " projector " << map.projector_resolution.width << "x"
      << map.projector_resolution.height << "\n";
  for (int y = 0; y < map.camera.height; ++y) {
    for (int x = 0; x < map.camera.width; ++x) {
      if (map.forward_x(y, x) == kUndefined) continue;
      out << x << ' ' << y << ' ' << map.forward_x(y, x) << ' ' << map.forward_y(y, x) << '\n';
    }
  }
}

std::vector<GammaSample> measure_response(const ProjectorModel& projector, int channel, int levels,
                                          double relative_noise, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<GammaSample> samples;
  const auto& response = projector.response(channel);
  for (int i = 0; i < levels; ++i) {
    const double x = 255.0 * i / (levels - 1);
    double y = response(x);
    if (relative_noise > 0.0) y *= 1.0 + relative_noise * noise(rng);
    samples.push_back({x, y});
  }
  return samples;
}

}  // namespace depthproj
