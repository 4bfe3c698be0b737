#include <gtest/gtest.h>

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "depthproj/pipeline.hpp"
#include "depthproj/scene_io.hpp"

using namespace depthproj;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

DemoParams small_demo() {
  DemoParams p;
  p.projector_width = 48;
  p.projector_height = 36;
  p.camera_width = 64;
  p.camera_height = 48;
  return p;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("depthproj_pipe_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_demo(const fs::path& dir, DemoKind kind) {
  const fs::path path = dir / "scene.json";
  save_scene(make_demo_scene(kind, small_demo()), path);
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig config_for(const fs::path& scene, const fs::path& out) {
  RunConfig c;
  c.scene_path = scene;
  c.output_dir = out;
  c.threads = 1;
  c.methods = {"LF", "EO", "EO:-100:255"};
  return c;
}

double plane_depth(const SurfaceModel& s) {
  const auto& pl = std::get<PlaneGeometry>(s.geometry);
  return pl.point.dot(pl.normal) / pl.normal.z();
}

}  // namespace

TEST(DemoScene, TwoPlanesAtEightyAndHundredCentimetres) {
  const auto s = make_demo_scene(DemoKind::TwoPlanes);
  ASSERT_EQ(s.surfaces.size(), 2u);
  ASSERT_EQ(s.projectors.size(), 2u);
  EXPECT_NEAR(plane_depth(s.surfaces[0]), 0.8, 1e-12);
  EXPECT_NEAR(plane_depth(s.surfaces[1]), 1.0, 1e-12);
  EXPECT_NE(s.surfaces[0].layer, s.surfaces[1].layer);
  EXPECT_NE(s.targets[0].source, s.targets[1].source);
}

TEST(DemoScene, ThreePlanesHaveDistinctDepthsAndSparseRows) {
  const auto s = make_demo_scene(DemoKind::ThreePlanes, small_demo());
  ASSERT_EQ(s.surfaces.size(), 3u);
  std::set<double> depths;
  for (const auto& surf : s.surfaces) {
    const auto& hf = std::get<HeightField>(surf.geometry);
    EXPECT_EQ(hf.depths.minCoeff(), hf.depths.maxCoeff());
    depths.insert(hf.depths(0, 0));
  }
  EXPECT_EQ(depths.size(), 3u);
  CalibrationOptions opt;
  opt.geometric = true;
  const auto cal = calibrate(s, opt);
  const auto q = build_inverse_projection(s, cal.maps);
  const auto sys = assemble(s, q, load_targets(s, "."));
  for (Eigen::Index r = 0; r < sys.matrix.rows(); ++r) EXPECT_LE(sys.matrix.row(r).nonZeros(), 2);
  std::set<int> seen;
  for (const auto& row : sys.rows) seen.insert(row.surface);
  EXPECT_EQ(seen.size(), 3u);
}

TEST(DemoScene, HeadAndBoxHasVaryingNormals) {
  const auto s = make_demo_scene(DemoKind::HeadAndBox);
  const auto field = compute_normals(s.surfaces[0]);
  ASSERT_GT(field.normals.rows(), 100);
  const Eigen::RowVector3d mean = field.normals.colwise().mean();
  const double variance = (field.normals.rowwise() - mean).squaredNorm() / static_cast<double>(field.normals.rows());
  EXPECT_GT(variance, 1e-4);
  EXPECT_TRUE(s.surfaces[1].is_plane());
  EXPECT_EQ(s.surfaces[0].layer, s.surfaces[1].layer);
}

TEST(DemoScene, NamesRoundTrip) {
  for (const auto k : {DemoKind::TwoPlanes, DemoKind::ThreePlanes, DemoKind::HeadAndBox}) {
    EXPECT_EQ(demo_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(demo_kind_from_string("four-planes"), std::exception);
}

TEST(Methods, Parsing) {
  const SolverBounds def{0, 255};
  EXPECT_TRUE(parse_method("LF", def).linear_factorization);
  EXPECT_TRUE(parse_method("lf", def).linear_factorization);
  const auto eo = parse_method("EO", def);
  EXPECT_FALSE(eo.linear_factorization);
  EXPECT_EQ(eo.label, "EO_0^255");
  EXPECT_EQ(eo.slug(), "eo_0_255");
  const auto neg = parse_method("EO:-100:255", def);
  EXPECT_EQ(neg.bounds.lower, -100.0);
  EXPECT_EQ(neg.label, "EO_-100^255");
  EXPECT_EQ(neg.slug(), "eo_-100_255");
  EXPECT_THROW(parse_method("EO:5:1", def), std::exception);
  EXPECT_THROW(parse_method("QP", def), std::exception);
}

TEST(Export, RealizedDriveMatchesLinearIntentWithinQuantisation) {
  const auto s = make_demo_scene(DemoKind::TwoPlanes, small_demo());
  std::vector<GammaFit> fits;
  for (const auto& p : s.projectors) fits.push_back({p.gamma[0], 0.0, 0});
  std::vector<PatternImage> linear;
  for (const auto& p : s.projectors) {
    Image img(p.device.resolution.height, p.device.resolution.width);
    for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>((i * 37) % 256);
    linear.push_back({p.id, img});
  }
  linear[0].pixels(0, 0) = -40.0;  // negative drive emits nothing
  const auto drive = export_patterns(linear, fits);
  const auto realized = realize_patterns(s, drive);
  for (std::size_t j = 0; j < linear.size(); ++j) {
    EXPECT_EQ(drive[j].pixels, drive[j].pixels.array().round().matrix());
    EXPECT_GE(drive[j].pixels.minCoeff(), 0.0);
    EXPECT_LE(drive[j].pixels.maxCoeff(), 255.0);
    const Image err = (realized[j].pixels - linear[j].pixels.cwiseMax(0.0)).cwiseAbs();
    // Half a drive step, through the steepest part of the response curve.
    EXPECT_LT(err.maxCoeff(), 6.0) << j;
    EXPECT_LT(err.mean(), 1.0) << j;
  }
  EXPECT_EQ(realized[0].pixels(0, 0), 0.0);
}

TEST(RunPipeline, DeterministicMetricsAndArtifactsExist) {
  const auto dir = scratch("determinism");
  const auto scene = write_demo(dir, DemoKind::TwoPlanes);
  std::ostringstream log;
  auto c1 = config_for(scene, dir / "a");
  auto c2 = config_for(scene, dir / "b");
  c2.threads = 3;
  const auto r1 = run_pipeline(c1, log);
  const auto r2 = run_pipeline(c2, log);
  const auto m1 = slurp(r1.metrics_path);
  EXPECT_EQ(m1, slurp(r2.metrics_path));
  EXPECT_FALSE(fs::exists(dir / "a" / ".staging"));

  const auto metrics = json::parse(m1);
  ASSERT_EQ(metrics["records"].size(), 6u);
  for (const auto& rec : metrics["records"]) {
    for (const char* key : {"recombined", "difference", "mask"}) {
      EXPECT_TRUE(fs::exists(dir / "a" / rec[key].get<std::string>())) << rec[key];
    }
  }
  for (const auto& m : metrics["methods"]) {
    for (const auto& p : m["patterns"]) EXPECT_TRUE(fs::exists(dir / "a" / p.get<std::string>())) << p;
    EXPECT_TRUE(fs::exists(dir / "a" / m["solver"].get<std::string>()));
  }
  for (const auto& t : metrics["targets"]) EXPECT_TRUE(fs::exists(dir / "a" / t["image"].get<std::string>()));
}

TEST(RunPipeline, MissingSceneLeavesNoOutput) {
  const auto dir = scratch("missing");
  std::ostringstream log;
  auto c = config_for(dir / "absent.json", dir / "out");
  try {
    run_pipeline(c, log);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "load");
    EXPECT_NE(std::string(e.what()).find("[load]"), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(RunPipeline, LateFailureRemovesPartialArtifacts) {
  const auto dir = scratch("late");
  auto s = make_demo_scene(DemoKind::TwoPlanes, small_demo());
  // Point every projector away from the screens: calibration finds nothing.
  for (auto& p : s.projectors) p.device.pose.linear() = look_rotation({0, 0, -1}, {0, 1, 0});
  save_scene(s, dir / "scene.json");
  std::ostringstream log;
  auto c = config_for(dir / "scene.json", dir / "out");
  try {
    run_pipeline(c, log);
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "calibrate");
  }
  EXPECT_FALSE(fs::exists(dir / "out"));

  // An existing output directory is left as it was.
  fs::create_directories(dir / "keep");
  std::ofstream(dir / "keep" / "note.txt") << "mine";
  c.output_dir = dir / "keep";
  EXPECT_THROW(run_pipeline(c, log), StageError);
  std::vector<fs::path> left;
  for (const auto& e : fs::directory_iterator(dir / "keep")) left.push_back(e.path().filename());
  EXPECT_EQ(left, std::vector<fs::path>{"note.txt"});
}

TEST(RunPipeline, EmptyMethodListIsAConfigError) {
  const auto dir = scratch("nomethods");
  const auto scene = write_demo(dir, DemoKind::TwoPlanes);
  auto c = config_for(scene, dir / "out");
  c.methods.clear();
  std::ostringstream log;
  try {
    run_pipeline(c, log);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "config");
  }
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, MissingSceneExitsNonZeroWithoutOutput) {
  const auto dir = scratch("cli");
  const std::string cmd = std::string(DEPTHPROJ_CLI) + " run --scene " + (dir / "nope.json").string() + " --out " +
                          (dir / "out").string() + " > " + (dir / "log.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  EXPECT_NE(status, 0);
  EXPECT_FALSE(fs::exists(dir / "out"));
  EXPECT_NE(slurp(dir / "log.txt").find("[load]"), std::string::npos);
}

TEST(Cli, DemoThenStagedVerbsReproduceRun) {
  const auto dir = scratch("cli_stages");
  const std::string cli = DEPTHPROJ_CLI;
  const std::string d = dir.string();
  auto run = [&](const std::string& args) { return std::system((cli + " " + args + " > /dev/null 2>&1").c_str()); };
  ASSERT_EQ(run("demo two-planes --out " + d + "/demo --projector-width 40 --projector-height 30 --camera-width 48 "
                "--camera-height 36"),
            0);
  const std::string scene = d + "/demo/scene.json";
  ASSERT_TRUE(fs::exists(scene));
  ASSERT_EQ(run("calibrate --scene " + scene + " --out " + d + "/s"), 0);
  ASSERT_EQ(run("solve --scene " + scene + " --maps " + d + "/s --out " + d + "/s --method EO"), 0);
  ASSERT_EQ(run("render --scene " + scene + " --maps " + d + "/s --patterns " + d + "/s --out " + d +
                "/s --method EO"),
            0);
  ASSERT_EQ(run("eval --scene " + scene + " --images " + d + "/s --out " + d + "/s --method EO"), 0);
  ASSERT_EQ(run("run --scene " + scene + " --out " + d + "/r --method EO"), 0);
  EXPECT_TRUE(fs::exists(d + "/s/" + pattern_file("eo_0_255", 1)));
  EXPECT_TRUE(fs::exists(d + "/s/" + recombined_file("eo_0_255", 0)));
  EXPECT_EQ(slurp(d + "/s/" + recombined_file("eo_0_255", 1)), slurp(d + "/r/" + recombined_file("eo_0_255", 1)));
}
