#include "depthproj/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "depthproj/image_io.hpp"
#include "depthproj/scene_io.hpp"
#include "depthproj/targets.hpp"
#include "json.hpp"

namespace depthproj {

namespace fs = std::filesystem;
using nlohmann::json;

DemoKind demo_kind_from_string(const std::string& name) {
  if (name == "two-planes") return DemoKind::TwoPlanes;
  if (name == "three-planes") return DemoKind::ThreePlanes;
  if (name == "head-and-box") return DemoKind::HeadAndBox;
  throw Error("unknown demo scene '" + name + "' (two-planes, three-planes, head-and-box)");
}

std::string to_string(DemoKind kind) {
  switch (kind) {
    case DemoKind::TwoPlanes: return "two-planes";
    case DemoKind::ThreePlanes: return "three-planes";
    case DemoKind::HeadAndBox: return "head-and-box";
  }
  return "?";
}

namespace {

SurfaceModel plane_at(int id, int layer, double depth) {
  SurfaceModel s;
  s.id = id;
  s.layer = layer;
  s.geometry = PlaneGeometry{Eigen::Vector3d(0, 0, depth), Eigen::Vector3d(0, 0, -1)};
  return s;
}

// Ellipsoidal dome on a slab with a few seeded ripples; depths in metres.
HeightField head_height_field(std::uint64_t seed) {
  constexpr int w = 48;
  constexpr int h = 64;
  HeightField hf;
  hf.spacing = 0.24 / (w - 1);
  hf.origin = Eigen::Vector2d(-0.12, -0.5 * hf.spacing * (h - 1));
  hf.depths.resize(h, w);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  const double p1 = phase(rng);
  const double p2 = phase(rng);
  for (int gy = 0; gy < h; ++gy) {
    for (int gx = 0; gx < w; ++gx) {
      const double x = hf.origin.x() + gx * hf.spacing;
      const double y = hf.origin.y() + gy * hf.spacing;
      const double e = 1.0 - (x / 0.1) * (x / 0.1) - (y / 0.14) * (y / 0.14);
      double depth = 0.92 - 0.15 * std::sqrt(std::max(0.0, e));
      depth += 0.004 * std::sin(40.0 * x + p1) * std::cos(30.0 * y + p2);
      hf.depths(gy, gx) = depth;
    }
  }
  return hf;
}

// Finite flat board at `depth` spanning camera rays with x/z in [u0, u1] and
// |y/z| <= v, as a constant height field in the camera frame.
SurfaceModel board_at(int id, int layer, double depth, double u0, double u1, double v) {
  constexpr int columns = 9;
  HeightField hf;
  hf.spacing = (u1 - u0) * depth / (columns - 1);
  const int rows = static_cast<int>(std::ceil(2.0 * v * depth / hf.spacing)) + 1;
  hf.origin = Eigen::Vector2d(u0 * depth, -0.5 * hf.spacing * (rows - 1));
  hf.depths = Raster<double>::Constant(rows, columns, depth);
  SurfaceModel s;
  s.id = id;
  s.layer = layer;
  s.geometry = std::move(hf);
  return s;
}

}  // namespace

SceneDescription make_demo_scene(DemoKind kind, const DemoParams& params) {
  if (params.projector_width < 8 || params.projector_height < 8 || params.camera_width < 8 ||
      params.camera_height < 8) {
    throw Error("demo resolutions must be at least 8x8");
  }
  if (!(params.baseline > 0.0 && params.baseline < 0.5)) throw Error("demo baseline must lie in (0, 0.5) m");

  SceneDescription scene;
  const std::array<GammaModel, 2> responses{GammaModel{std::pow(255.0, -1.2), 2.2, 0.0},
                                            GammaModel{0.9 * std::pow(255.0, -1.0), 2.0, 2.0}};
  for (int j = 0; j < 2; ++j) {
    ProjectorModel p;
    p.id = j;
    p.device.resolution = {params.projector_width, params.projector_height};
    p.device.intrinsics = {static_cast<double>(params.projector_width), static_cast<double>(params.projector_width),
                           params.projector_width / 2.0, params.projector_height / 2.0};
    p.device.pose.translation() = Eigen::Vector3d(0.0, (j == 0 ? -0.5 : 0.5) * params.baseline, 0.0);
    p.gamma = {responses[static_cast<std::size_t>(j)]};
    scene.projectors.push_back(p);
  }
  // Narrower than the projectors so every camera ray lands where both overlap.
  const double f = 1.4 * params.camera_width;
  scene.camera.device.resolution = {params.camera_width, params.camera_height};
  scene.camera.device.intrinsics = {f, f, params.camera_width / 2.0, params.camera_height / 2.0};

  const auto seed = params.seed;
  auto target = [&](const std::string& kind_name, std::uint64_t s) { return "procedural:" + kind_name + ":" + std::to_string(s); };
  switch (kind) {
    case DemoKind::TwoPlanes:
      scene.surfaces = {plane_at(0, 0, 0.8), plane_at(1, 1, 1.0)};
      scene.targets = {{0, target("noise", seed)}, {1, target("noise", seed + 1)}};
      break;
    case DemoKind::ThreePlanes: {
      // Three boards side by side, all in view at once; seen from the camera
      // each fills a third of the frame.
      const double edge = 0.5 * params.camera_width / f;
      const double third = 2.0 * edge / 3.0;
      const double gap = 0.01;
      scene.surfaces = {board_at(0, 0, 0.8, -1.2 * edge, -edge + third - gap, 0.3),
                        board_at(1, 0, 0.9, -edge + third + gap, edge - third - gap, 0.3),
                        board_at(2, 0, 1.0, edge - third + gap, 1.2 * edge, 0.3)};
      scene.targets = {{0, target("disc", seed) + "@0.03,0.1,0.3,0.9"},
                       {1, target("cross", seed) + "@0.37,0.1,0.63,0.9"},
                       {2, target("bars", seed) + "@0.7,0.1,0.97,0.9"}};
      break;
    }
    case DemoKind::HeadAndBox: {
      SurfaceModel head;
      head.id = 0;
      head.layer = 0;
      head.geometry = head_height_field(seed);
      scene.surfaces = {head, plane_at(1, 0, 1.0)};
      scene.targets = {{0, target("checker", seed)}, {1, target("gradient", seed * 37)}};
      break;
    }
  }
  scene.prepare();
  return scene;
}

std::string MethodSpec::slug() const {
  if (linear_factorization) return "lf";
  std::ostringstream s;
  s << "eo_" << bounds.lower << '_' << bounds.upper;
  return s.str();
}

MethodSpec parse_method(const std::string& text, SolverBounds default_bounds) {
  std::string upper = text;
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  MethodSpec m;
  if (upper == "LF") {
    m.label = "LF";
    m.linear_factorization = true;
    return m;
  }
  if (upper == "EO") {
    m.bounds = default_bounds;
  } else if (upper.starts_with("EO:")) {
    const auto second = upper.find(':', 3);
    if (second == std::string::npos) throw Error("method '" + text + "' must read EO:<a>:<b>");
    try {
      m.bounds.lower = std::stod(upper.substr(3, second - 3));
      m.bounds.upper = std::stod(upper.substr(second + 1));
    } catch (const std::exception&) {
      throw Error("method '" + text + "' has non-numeric bounds");
    }
  } else {
    throw Error("unknown method '" + text + "' (LF, EO or EO:<a>:<b>)");
  }
  try {
    m.bounds.validate();
  } catch (const std::invalid_argument& e) {
    throw Error("method '" + text + "': " + e.what());
  }
  std::ostringstream label;
  label << "EO_" << m.bounds.lower << '^' << m.bounds.upper;
  m.label = label.str();
  return m;
}

CalibrationResult calibrate(const SceneDescription& scene, const CalibrationOptions& options) {
  CalibrationResult out;
  const HoleFillSettings fill{scene.calibration.hole_fill_quorum, scene.calibration.hole_fill_iterations};
  for (int j = 0; j < static_cast<int>(scene.projectors.size()); ++j) {
    for (const int layer : scene.layers()) {
      if (options.geometric) {
        out.maps.push_back(geometric_correspondences(scene, j, layer, options.threads));
      } else {
        out.maps.push_back(
            fill_holes(decode_correspondences(scene, j, layer, scene.calibration, options.threads), fill));
      }
    }
    const auto samples = measure_response(scene.projectors[static_cast<std::size_t>(j)], 0, options.gamma_levels,
                                          options.gamma_noise, options.seed + static_cast<std::uint64_t>(j));
    out.gamma.push_back(fit_gamma(samples));
  }
  return out;
}

std::vector<TargetImage> load_targets(const SceneDescription& scene, const fs::path& base) {
  const auto res = scene.camera.device.resolution;
  std::vector<TargetImage> out;
  for (const auto& s : scene.surfaces) {
    out.push_back({s.id, load_target(scene.target_for(s.id).source, base, res.width, res.height)});
  }
  return out;
}

std::vector<PatternImage> export_patterns(std::span<const PatternImage> linear, std::span<const GammaFit> fits) {
  std::vector<PatternImage> out;
  for (const auto& pat : linear) {
    const auto& model = fits[static_cast<std::size_t>(pat.projector)].model;
    PatternImage d{pat.projector, Image(pat.pixels.rows(), pat.pixels.cols())};
    for (Eigen::Index i = 0; i < pat.pixels.size(); ++i) {
      d.pixels.data()[i] = std::round(compensate(model, pat.pixels.data()[i]));
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<PatternImage> realize_patterns(const SceneDescription& scene, std::span<const PatternImage> drive) {
  std::vector<PatternImage> out;
  for (const auto& pat : drive) {
    const auto& f = scene.projectors.at(static_cast<std::size_t>(pat.projector)).response(0);
    const double lo = f(0.0);
    const double hi = f(255.0);
    PatternImage r{pat.projector, Image(pat.pixels.rows(), pat.pixels.cols())};
    for (Eigen::Index i = 0; i < pat.pixels.size(); ++i) {
      r.pixels.data()[i] = 255.0 * (f(std::clamp(pat.pixels.data()[i], 0.0, 255.0)) - lo) / (hi - lo);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::pair<double, double> used_value_range(const SparseSystem& system, const Eigen::VectorXd& values) {
  const auto used = used_columns(system);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Eigen::Index c = 0; c < values.size(); ++c) {
    if (!used[static_cast<std::size_t>(c)]) continue;
    lo = std::min(lo, values(c));
    hi = std::max(hi, values(c));
  }
  if (!std::isfinite(lo)) return {0.0, 0.0};
  return {lo, hi};
}

std::vector<QualityRecord> score(std::span<const RecombinedImage> recombined, std::span<const TargetImage> targets,
                                 const std::string& method) {
  std::vector<QualityRecord> out;
  for (const auto& img : recombined) {
    const auto t = std::find_if(targets.begin(), targets.end(), [&](const auto& x) { return x.surface == img.surface; });
    if (t == targets.end()) throw Error("no target for surface " + std::to_string(img.surface));
    if (img.mask.count() == 0) throw Error("surface " + std::to_string(img.surface) + " receives no light");
    QualityRecord rec;
    rec.surface = img.surface;
    rec.method = method;
    rec.psnr = psnr(t->pixels, img.pixels, img.mask);
    rec.ssim = ssim(t->pixels, img.pixels, img.mask);
    out.push_back(rec);
  }
  return out;
}

MethodResult run_method(const SceneDescription& scene, const SparseSystem& system, const InverseProjectionMap& q,
                        std::span<const TargetImage> targets, std::span<const GammaFit> gamma,
                        const MethodSpec& method, int threads) {
  MethodResult r;
  r.method = method;
  Eigen::VectorXd values;
  if (method.linear_factorization) {
    auto lf = solve_lf(system);
    values = lf.values;
    r.linear = std::move(lf.patterns);
    r.warnings = std::move(lf.warnings);
    r.lf_scale = lf.scale;
    r.lf_offset = lf.offset;
    std::tie(r.unconstrained_min, r.unconstrained_max) = used_value_range(system, lf.unconstrained);
  } else {
    EoOptions options;
    options.threads = threads;
    auto eo = solve_eo(system, method.bounds, options);
    values = eo.values;
    r.linear = std::move(eo.patterns);
    r.warnings = std::move(eo.warnings);
    r.chains = std::move(eo.chains);
    std::tie(r.unconstrained_min, r.unconstrained_max) = used_value_range(system, values);
  }
  r.drive = export_patterns(r.linear, gamma);
  const auto realized = realize_patterns(scene, r.drive);
  r.recombined = render_patterns(scene, q, realized, system.convention, threads);
  r.quality = score(r.recombined, targets, method.label);
  const auto [lo, hi] = used_value_range(system, values);
  for (auto& rec : r.quality) {
    rec.value_min = lo;
    rec.value_max = hi;
    rec.span = (hi - lo) / 255.0;
  }
  return r;
}

std::string map_file(int projector, int layer) {
  return "corr_p" + std::to_string(projector) + "_l" + std::to_string(layer) + ".dpcm";
}
std::string pattern_file(const std::string& slug, int projector) {
  return "pattern_" + slug + "_p" + std::to_string(projector) + ".png";
}
std::string recombined_file(const std::string& slug, int surface) {
  return "recombined_" + slug + "_s" + std::to_string(surface) + ".png";
}
std::string difference_file(const std::string& slug, int surface) {
  return "difference_" + slug + "_s" + std::to_string(surface) + ".png";
}
std::string mask_file(const std::string& slug, int surface) {
  return "mask_" + slug + "_s" + std::to_string(surface) + ".png";
}

std::vector<CorrespondenceMap> load_maps(const SceneDescription& scene, const fs::path& dir) {
  std::vector<CorrespondenceMap> maps;
  for (int j = 0; j < static_cast<int>(scene.projectors.size()); ++j) {
    for (const int layer : scene.layers()) {
      auto m = read_correspondence_map((dir / map_file(j, layer)).string());
      if (m.projector != j || m.layer != layer || !(m.camera == scene.camera.device.resolution) ||
          !(m.projector_resolution == scene.projectors[static_cast<std::size_t>(j)].device.resolution)) {
        throw Error((dir / map_file(j, layer)).string() + " does not belong to this scene");
      }
      maps.push_back(std::move(m));
    }
  }
  return maps;
}

namespace {

json metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

template <typename F>
auto in_stage(const char* name, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

Image mask_image(const Mask& m) { return (m.cast<double>() * 255.0); }

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace

RunReport run_pipeline(const RunConfig& config, std::ostream& log) {
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };

  SceneDescription scene = in_stage("load", [&] { return load_scene(config.scene_path); });
  const fs::path base = config.scene_path.parent_path();
  const SolverBounds default_bounds = config.bounds.value_or(scene.bounds);
  const auto methods = in_stage("config", [&] {
    if (config.methods.empty()) throw Error("at least one method is required");
    std::vector<MethodSpec> m;
    for (const auto& text : config.methods) m.push_back(parse_method(text, default_bounds));
    return m;
  });
  const auto targets = in_stage("targets", [&] { return load_targets(scene, base); });
  log << "scene: " << scene.projectors.size() << " projectors, " << scene.surfaces.size() << " surfaces\n";

  const fs::path out_dir = config.output_dir;
  const bool created_out = in_stage("output", [&] { return fs::create_directories(out_dir); });
  const fs::path staging = out_dir / ".staging";
  try {
    in_stage("output", [&] {
      fs::remove_all(staging);
      fs::create_directories(staging);
      return 0;
    });

    CalibrationOptions copt;
    copt.threads = config.threads;
    copt.geometric = config.geometric_calibration;
    copt.seed = config.seed;
    const auto calib = in_stage("calibrate", [&] { return calibrate(scene, copt); });
    log << "calibrate: " << calib.maps.size() << " correspondence maps (" << elapsed() << " s)\n";

    const auto q = in_stage("assemble", [&] { return build_inverse_projection(scene, calib.maps, config.threads); });
    const auto system = in_stage("assemble", [&] { return assemble(scene, q, targets, config.convention); });
    const auto chains = extract_chains(system);
    log << "assemble: " << system.matrix.rows() << " rows, " << system.cols() << " columns, "
        << system.matrix.nonZeros() << " nonzeros, " << chains.size() << " chains, " << system.infeasible.size()
        << " infeasible rows (" << elapsed() << " s)\n";

    RunReport report;
    json metrics;
    metrics["scene"] = config.scene_path.filename().string();
    metrics["convention"] = to_string(config.convention);
    metrics["projectors"] = scene.projectors.size();
    metrics["surfaces"] = scene.surfaces.size();
    metrics["calibration"] = json::array();
    for (const auto& m : calib.maps) {
      metrics["calibration"].push_back({{"projector", m.projector},
                                        {"layer", m.layer},
                                        {"defined_pixels", m.defined_count()},
                                        {"camera_pixels", m.camera.pixel_count()}});
    }
    metrics["gamma"] = json::array();
    for (std::size_t j = 0; j < calib.gamma.size(); ++j) {
      const auto& g = calib.gamma[j];
      metrics["gamma"].push_back({{"projector", j}, {"a", g.model.a}, {"b", g.model.b}, {"c", g.model.c}, {"rms", g.rms}});
    }
    std::size_t largest_chain = 0;
    for (const auto& c : chains) largest_chain = std::max(largest_chain, c.variables.size());
    metrics["system"] = {{"rows", system.matrix.rows()},
                         {"columns", system.cols()},
                         {"nonzeros", system.matrix.nonZeros()},
                         {"infeasible_rows", system.infeasible.size()},
                         {"chains", chains.size()},
                         {"largest_chain", largest_chain}};
    metrics["targets"] = json::array();
    for (const auto& t : targets) {
      const std::string name = "target_s" + std::to_string(t.surface) + ".png";
      in_stage("export", [&] {
        write_png8(staging / name, t.pixels);
        return 0;
      });
      metrics["targets"].push_back({{"surface", t.surface}, {"image", name}});
    }
    metrics["records"] = json::array();
    metrics["methods"] = json::array();

    for (const auto& method : methods) {
      auto result = in_stage("solve", [&] {
        return run_method(scene, system, q, targets, calib.gamma, method, config.threads);
      });
      log << method.label << ":";
      for (const auto& rec : result.quality) log << " s" << rec.surface << " PSNR " << rec.psnr << " SSIM " << rec.ssim;
      log << " (" << elapsed() << " s)\n";
      for (const auto& w : result.warnings) log << "warning: " << method.label << ": " << w << '\n';

      const std::string slug = method.slug();
      json patterns = json::array();
      in_stage("export", [&] {
        for (const auto& d : result.drive) {
          const std::string name = pattern_file(slug, d.projector);
          write_png8(staging / name, d.pixels);
          patterns.push_back(name);
        }
        for (std::size_t k = 0; k < result.recombined.size(); ++k) {
          const auto& img = result.recombined[k];
          const auto& rec = result.quality[k];
          const std::string rname = recombined_file(slug, img.surface);
          const std::string dname = difference_file(slug, img.surface);
          const std::string mname = mask_file(slug, img.surface);
          write_png8(staging / rname, img.pixels);
          write_png8(staging / dname,
                     difference_image(targets[static_cast<std::size_t>(img.surface)].pixels, img.pixels, img.mask));
          write_png8(staging / mname, mask_image(img.mask));
          metrics["records"].push_back({{"method", method.label},
                                        {"surface", rec.surface},
                                        {"psnr", metric(rec.psnr)},
                                        {"ssim", metric(rec.ssim)},
                                        {"value_min", rec.value_min},
                                        {"value_max", rec.value_max},
                                        {"span", rec.span},
                                        {"recombined", rname},
                                        {"difference", dname},
                                        {"mask", mname}});
        }
        json sidecar = {{"method", method.label},
                        {"infeasible_rows", system.infeasible.size()},
                        {"warnings", result.warnings}};
        if (method.linear_factorization) {
          sidecar["scale"] = result.lf_scale;
          sidecar["offset"] = result.lf_offset;
          sidecar["unconstrained_min"] = result.unconstrained_min;
          sidecar["unconstrained_max"] = result.unconstrained_max;
        } else {
          sidecar["bounds"] = {{"a", method.bounds.lower}, {"b", method.bounds.upper}};
          json per_chain = json::array();
          for (const auto& c : result.chains) {
            per_chain.push_back({{"chain", c.chain},
                                 {"variables", c.variables},
                                 {"rows", c.rows},
                                 {"iterations", c.iterations},
                                 {"converged", c.converged},
                                 {"residual_rms", c.residual_rms}});
          }
          sidecar["chains"] = per_chain;
        }
        const std::string sname = "solver_" + slug + ".json";
        write_json(staging / sname, sidecar);
        metrics["methods"].push_back({{"method", method.label}, {"patterns", patterns}, {"solver", sname}});
        return 0;
      });
      report.methods.push_back(std::move(result));
    }

    in_stage("export", [&] {
      write_json(staging / "metrics.json", metrics);
      for (const auto& entry : fs::directory_iterator(staging)) {
        fs::rename(entry.path(), out_dir / entry.path().filename());
      }
      fs::remove_all(staging);
      return 0;
    });
    report.metrics_path = out_dir / "metrics.json";
    log << "done in " << elapsed() << " s; report " << report.metrics_path.string() << '\n';
    return report;
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    if (created_out) fs::remove(out_dir, ec);  // only succeeds when still empty
    throw;
  }
}

}  // namespace depthproj
