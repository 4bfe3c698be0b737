// Command-line front end: demo scenes, calibration, solving, rendering and
// scoring, each runnable on its own or chained by `run`.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "depthproj/image_io.hpp"
#include "depthproj/pipeline.hpp"
#include "depthproj/scene_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace depthproj;

namespace {

struct Common {
  std::string scene;
  std::string out = "out";
  std::string convention = "verbatim";
  int threads = 0;
  std::uint64_t seed = 0;
  std::optional<double> a;
  std::optional<double> b;
};

void add_common(CLI::App* cmd, Common& c, bool needs_scene = true) {
  auto* opt = cmd->add_option("--scene", c.scene, "scene JSON file");
  if (needs_scene) opt->required();
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--threads", c.threads, "worker threads (0 = all cores)")->capture_default_str();
  cmd->add_option("--convention", c.convention, "attenuation convention: verbatim | physical")->capture_default_str();
  cmd->add_option("--seed", c.seed, "seed for simulated measurement noise")->capture_default_str();
}

SolverBounds bounds_for(const Common& c, const SceneDescription& scene) {
  SolverBounds b = scene.bounds;
  if (c.a) b.lower = *c.a;
  if (c.b) b.upper = *c.b;
  return b;
}

SceneDescription load(const Common& c) {
  try {
    return load_scene(c.scene);
  } catch (const std::exception& e) {
    throw StageError("load", e.what());
  }
}

// Calibration maps either from --maps or recomputed.
std::vector<CorrespondenceMap> maps_for(const SceneDescription& scene, const std::string& maps_dir, const Common& c,
                                        bool geometric) {
  try {
    if (!maps_dir.empty()) return load_maps(scene, maps_dir);
    CalibrationOptions opt;
    opt.threads = c.threads;
    opt.geometric = geometric;
    opt.seed = c.seed;
    return calibrate(scene, opt).maps;
  } catch (const std::exception& e) {
    throw StageError("calibrate", e.what());
  }
}

std::vector<GammaFit> gamma_for(const SceneDescription& scene, const Common& c) {
  CalibrationOptions opt;
  opt.seed = c.seed;
  std::vector<GammaFit> fits;
  for (std::size_t j = 0; j < scene.projectors.size(); ++j) {
    const auto samples =
        measure_response(scene.projectors[j], 0, opt.gamma_levels, opt.gamma_noise, opt.seed + j);
    fits.push_back(fit_gamma(samples));
  }
  return fits;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

int cmd_demo(const std::string& kind, const DemoParams& params, const std::string& out) {
  const auto scene = make_demo_scene(demo_kind_from_string(kind), params);
  const fs::path dir(out);
  fs::create_directories(dir);
  save_scene(scene, dir / "scene.json");
  std::cout << "wrote " << (dir / "scene.json").string() << '\n';
  return 0;
}

int cmd_calibrate(const Common& c, bool geometric) {
  const auto scene = load(c);
  CalibrationOptions opt;
  opt.threads = c.threads;
  opt.geometric = geometric;
  opt.seed = c.seed;
  CalibrationResult calib;
  try {
    calib = calibrate(scene, opt);
  } catch (const std::exception& e) {
    throw StageError("calibrate", e.what());
  }
  const fs::path dir(c.out);
  fs::create_directories(dir);
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& m : calib.maps) {
    write_correspondence_map(m, (dir / map_file(m.projector, m.layer)).string());
    summary.push_back({{"projector", m.projector},
                       {"layer", m.layer},
                       {"file", map_file(m.projector, m.layer)},
                       {"defined_pixels", m.defined_count()}});
  }
  nlohmann::json gamma = nlohmann::json::array();
  for (std::size_t j = 0; j < calib.gamma.size(); ++j) {
    const auto& g = calib.gamma[j];
    gamma.push_back({{"projector", j}, {"a", g.model.a}, {"b", g.model.b}, {"c", g.model.c}, {"rms", g.rms}});
  }
  write_json(dir / "calibration.json", {{"maps", summary}, {"gamma", gamma}});
  std::cout << "wrote " << calib.maps.size() << " correspondence maps to " << dir.string() << '\n';
  return 0;
}

int cmd_solve(const Common& c, const std::vector<std::string>& methods, const std::string& maps_dir, bool geometric) {
  const auto scene = load(c);
  const auto convention = convention_from_string(c.convention);
  const auto targets = load_targets(scene, fs::path(c.scene).parent_path());
  const auto maps = maps_for(scene, maps_dir, c, geometric);
  InverseProjectionMap q;
  SparseSystem system;
  try {
    q = build_inverse_projection(scene, maps, c.threads);
    system = assemble(scene, q, targets, convention);
  } catch (const std::exception& e) {
    throw StageError("assemble", e.what());
  }
  const auto gamma = gamma_for(scene, c);
  const fs::path dir(c.out);
  fs::create_directories(dir);
  for (const auto& text : methods) {
    const auto method = parse_method(text, bounds_for(c, scene));
    MethodResult r;
    try {
      r = run_method(scene, system, q, targets, gamma, method, c.threads);
    } catch (const std::exception& e) {
      throw StageError("solve", e.what());
    }
    for (const auto& d : r.drive) write_png8(dir / pattern_file(method.slug(), d.projector), d.pixels);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << method.label << ": patterns written to " << dir.string() << '\n';
  }
  return 0;
}

int cmd_render(const Common& c, const std::string& method_text, const std::string& patterns_dir,
               const std::string& maps_dir, bool geometric) {
  const auto scene = load(c);
  const auto method = parse_method(method_text, bounds_for(c, scene));
  const auto maps = maps_for(scene, maps_dir, c, geometric);
  const auto q = build_inverse_projection(scene, maps, c.threads);
  std::vector<PatternImage> drive;
  for (int j = 0; j < static_cast<int>(scene.projectors.size()); ++j) {
    const fs::path file = fs::path(patterns_dir) / pattern_file(method.slug(), j);
    auto img = read_png(file);
    drive.push_back({j, img.pixels});
  }
  const auto realized = realize_patterns(scene, drive);
  const auto images = render_patterns(scene, q, realized, convention_from_string(c.convention), c.threads);
  const fs::path dir(c.out);
  fs::create_directories(dir);
  for (const auto& img : images) {
    write_png8(dir / recombined_file(method.slug(), img.surface), img.pixels);
    write_png8(dir / mask_file(method.slug(), img.surface), (img.mask.cast<double>() * 255.0).eval());
  }
  std::cout << "rendered " << images.size() << " surfaces to " << dir.string() << '\n';
  return 0;
}

int cmd_eval(const Common& c, const std::string& method_text, const std::string& images_dir) {
  const auto scene = load(c);
  const auto method = parse_method(method_text, bounds_for(c, scene));
  const auto targets = load_targets(scene, fs::path(c.scene).parent_path());
  nlohmann::json records = nlohmann::json::array();
  for (const auto& t : targets) {
    const fs::path dir(images_dir);
    const auto img = read_png(dir / recombined_file(method.slug(), t.surface)).pixels;
    const Mask mask = (read_png(dir / mask_file(method.slug(), t.surface)).pixels.array() > 127.0).cast<std::uint8_t>();
    const double p = psnr(t.pixels, img, mask);
    const double s = ssim(t.pixels, img, mask);
    std::cout << method.label << " s" << t.surface << ": PSNR " << p << " dB, SSIM " << s << '\n';
    records.push_back({{"method", method.label},
                       {"surface", t.surface},
                       {"psnr", std::isinf(p) ? nlohmann::json("inf") : nlohmann::json(p)},
                       {"ssim", s}});
  }
  fs::create_directories(c.out);
  write_json(fs::path(c.out) / ("eval_" + method.slug() + ".json"), {{"records", records}});
  return 0;
}

int cmd_run(const Common& c, const std::vector<std::string>& methods, bool geometric) {
  RunConfig cfg;
  cfg.scene_path = c.scene;
  cfg.methods = methods;
  if (c.a || c.b) cfg.bounds = SolverBounds{c.a.value_or(0.0), c.b.value_or(255.0)};
  cfg.output_dir = c.out;
  cfg.convention = convention_from_string(c.convention);
  cfg.threads = c.threads;
  cfg.seed = c.seed;
  cfg.geometric_calibration = geometric;
  run_pipeline(cfg, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-projector pattern optimisation for surfaces at several depths"};
  app.require_subcommand(1);

  Common common;
  std::vector<std::string> methods{"LF", "EO"};
  std::string method = "EO";
  std::string maps_dir;
  std::string patterns_dir;
  std::string images_dir;
  bool geometric = false;

  std::string demo_kind = "two-planes";
  DemoParams demo;
  std::string demo_out = "demo";
  bool demo_run = false;

  auto* demo_cmd = app.add_subcommand("demo", "write a ready-to-run demo scene");
  demo_cmd->add_option("kind", demo_kind, "two-planes | three-planes | head-and-box")->capture_default_str();
  demo_cmd->add_option("--out", demo_out, "directory for scene.json (and run outputs)")->capture_default_str();
  demo_cmd->add_option("--projector-width", demo.projector_width)->capture_default_str();
  demo_cmd->add_option("--projector-height", demo.projector_height)->capture_default_str();
  demo_cmd->add_option("--camera-width", demo.camera_width)->capture_default_str();
  demo_cmd->add_option("--camera-height", demo.camera_height)->capture_default_str();
  demo_cmd->add_option("--baseline", demo.baseline, "projector separation in metres")->capture_default_str();
  demo_cmd->add_option("--seed", demo.seed, "target seed")->capture_default_str();
  demo_cmd->add_flag("--run", demo_run, "also run the full pipeline (LF and EO) on the scene");
  demo_cmd->add_option("--threads", common.threads)->capture_default_str();

  auto* calib_cmd = app.add_subcommand("calibrate", "simulate Gray-code calibration and write correspondence maps");
  add_common(calib_cmd, common);
  calib_cmd->add_flag("--geometric", geometric, "use projected geometry instead of decoding");

  auto* solve_cmd = app.add_subcommand("solve", "assemble the system and write gamma-compensated patterns");
  add_common(solve_cmd, common);
  solve_cmd->add_option("--method", methods, "LF, EO or EO:<a>:<b>; repeatable")->capture_default_str();
  solve_cmd->add_option("--a", common.a, "lower drive bound for EO");
  solve_cmd->add_option("--b", common.b, "upper drive bound for EO");
  solve_cmd->add_option("--maps", maps_dir, "directory written by `calibrate`");
  solve_cmd->add_flag("--geometric", geometric);

  auto* render_cmd = app.add_subcommand("render", "simulate projecting saved patterns");
  add_common(render_cmd, common);
  render_cmd->add_option("--method", method, "method whose patterns to render")->capture_default_str();
  render_cmd->add_option("--a", common.a);
  render_cmd->add_option("--b", common.b);
  render_cmd->add_option("--patterns", patterns_dir, "directory written by `solve`")->required();
  render_cmd->add_option("--maps", maps_dir, "directory written by `calibrate`");
  render_cmd->add_flag("--geometric", geometric);

  auto* eval_cmd = app.add_subcommand("eval", "score rendered images against the scene targets");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--method", method)->capture_default_str();
  eval_cmd->add_option("--a", common.a);
  eval_cmd->add_option("--b", common.b);
  eval_cmd->add_option("--images", images_dir, "directory written by `render`")->required();

  auto* run_cmd = app.add_subcommand("run", "calibrate, solve, render and score in one go");
  add_common(run_cmd, common);
  run_cmd->add_option("--method", methods, "LF, EO or EO:<a>:<b>; repeatable")->capture_default_str();
  run_cmd->add_option("--a", common.a, "lower drive bound for EO");
  run_cmd->add_option("--b", common.b, "upper drive bound for EO");
  run_cmd->add_flag("--geometric", geometric);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*demo_cmd) {
      cmd_demo(demo_kind, demo, demo_out);
      if (!demo_run) return 0;
      common.scene = (fs::path(demo_out) / "scene.json").string();
      common.out = demo_out;
      return cmd_run(common, methods, geometric);
    }
    if (*calib_cmd) return cmd_calibrate(common, geometric);
    if (*solve_cmd) return cmd_solve(common, methods, maps_dir, geometric);
    if (*render_cmd) return cmd_render(common, method, patterns_dir, maps_dir, geometric);
    if (*eval_cmd) return cmd_eval(common, method, images_dir);
    if (*run_cmd) return cmd_run(common, methods, geometric);
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
