#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "depthproj/image_io.hpp"
#include "depthproj/pipeline.hpp"
#include "depthproj/scene_io.hpp"
#include "depthproj/targets.hpp"

using namespace depthproj;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("depthproj_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Png, EightBitRoundTripRoundsAndClamps) {
  const auto dir = scratch("png8");
  Image img(3, 4);
  img << 0, 1.4, 1.6, 254.6, -20, 300, 128, 17, 5, 6, 7, 8;
  write_png8(dir / "a.png", img);
  const auto back = read_png(dir / "a.png");
  EXPECT_EQ(back.bit_depth, 8);
  Image want(3, 4);
  want << 0, 1, 2, 255, 0, 255, 128, 17, 5, 6, 7, 8;
  EXPECT_EQ(back.pixels, want);
}

TEST(Png, SixteenBitRoundTrip) {
  const auto dir = scratch("png16");
  Image img(2, 3);
  img << 0, 1, 65535, 300, 40000, 12345;
  write_png16(dir / "d.png", img);
  const auto back = read_png(dir / "d.png");
  EXPECT_EQ(back.bit_depth, 16);
  EXPECT_EQ(back.pixels, img);
}

TEST(Png, MissingFileThrows) {
  EXPECT_THROW(read_png("/nonexistent/definitely_missing.png"), Error);
}

TEST(Resample, SameSizeIsIdentityAndConstantsStayConstant) {
  Image img(4, 5);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>(i);
  EXPECT_EQ(resample(img, 5, 4), img);
  const Image c = resample(Image::Constant(7, 9, 42.0), 20, 11);
  EXPECT_EQ(c.rows(), 11);
  EXPECT_EQ(c.cols(), 20);
  EXPECT_NEAR(c.minCoeff(), 42.0, 1e-12);
  EXPECT_NEAR(c.maxCoeff(), 42.0, 1e-12);
}

TEST(Targets, ProceduralKindsStayInRange) {
  for (const auto& kind : procedural_kinds()) {
    const Image img = make_procedural(kind, 7, 33, 21);
    EXPECT_EQ(img.rows(), 21);
    EXPECT_EQ(img.cols(), 33);
    EXPECT_GE(img.minCoeff(), 0.0) << kind;
    EXPECT_LE(img.maxCoeff(), 255.0) << kind;
  }
  EXPECT_THROW(make_procedural("mandrill", 0, 4, 4), Error);
  EXPECT_EQ(make_procedural("noise", 3, 16, 16), make_procedural("noise", 3, 16, 16));
  EXPECT_NE(make_procedural("noise", 3, 16, 16), make_procedural("noise", 4, 16, 16));
}

TEST(Targets, PlacementBoxLeavesRestBlack) {
  const Image img = load_target("procedural:constant:200@0.5,0,1,0.5", ".", 10, 8);
  EXPECT_EQ(img(0, 5), 200.0);
  EXPECT_EQ(img(3, 9), 200.0);
  EXPECT_EQ(img(0, 4), 0.0);
  EXPECT_EQ(img(4, 9), 0.0);
  EXPECT_THROW(load_target("procedural:constant:1@0.5,0,0.2,1", ".", 10, 8), Error);
  EXPECT_THROW(load_target("procedural:noise:x", ".", 10, 8), Error);
}

TEST(Targets, ImageFilesAreResampledAndSixteenBitScaled) {
  const auto dir = scratch("targets");
  write_png16(dir / "t16.png", Image::Constant(4, 4, 257.0 * 100));
  const Image t = load_target("t16.png", dir, 8, 6);
  EXPECT_EQ(t.rows(), 6);
  EXPECT_NEAR(t.maxCoeff(), 100.0, 1e-9);
  EXPECT_NEAR(t.minCoeff(), 100.0, 1e-9);
}

TEST(SceneIo, SaveLoadRoundTrip) {
  DemoParams p;
  p.projector_width = 32;
  p.projector_height = 24;
  p.camera_width = 40;
  p.camera_height = 30;
  const auto scene = make_demo_scene(DemoKind::HeadAndBox, p);
  std::stringstream buf;
  save_scene(scene, buf);
  const auto back = parse_scene(buf, ".");
  ASSERT_EQ(back.projectors.size(), scene.projectors.size());
  ASSERT_EQ(back.surfaces.size(), scene.surfaces.size());
  for (std::size_t j = 0; j < scene.projectors.size(); ++j) {
    const auto& a = scene.projectors[j];
    const auto& b = back.projectors[j];
    EXPECT_EQ(a.device.resolution, b.device.resolution);
    EXPECT_EQ(a.device.intrinsics.fx, b.device.intrinsics.fx);
    EXPECT_TRUE(a.device.pose.isApprox(b.device.pose, 1e-15));
    EXPECT_EQ(a.gamma[0].b, b.gamma[0].b);
  }
  const auto& hf_a = std::get<HeightField>(scene.surfaces[0].geometry);
  const auto& hf_b = std::get<HeightField>(back.surfaces[0].geometry);
  EXPECT_EQ(hf_a.depths, hf_b.depths);
  EXPECT_EQ(hf_a.spacing, hf_b.spacing);
  EXPECT_EQ(back.targets[1].source, scene.targets[1].source);
  EXPECT_EQ(back.bounds.upper, scene.bounds.upper);
  // Prepared on load: a camera ray hits the same surface at the same distance.
  const auto h1 = cast_camera_ray(scene, {20, 15});
  const auto h2 = cast_camera_ray(back, {20, 15});
  ASSERT_TRUE(h1 && h2);
  EXPECT_EQ(h1->surface, h2->surface);
  EXPECT_DOUBLE_EQ(h1->distance, h2->distance);
}

TEST(SceneIo, ParsesMinimalSceneWithDefaults) {
  std::istringstream in(R"({
    "camera": {"resolution": [40, 30], "focal": 50},
    "projectors": [{"resolution": [32, 24], "focal": [30, 30],
                    "pose": {"look_at": [0, 0, 1], "translation": [0, -0.05, 0]}}],
    "surfaces": [{"type": "plane", "point": [0, 0, 1], "normal": [0, 0, -1]}],
    "targets": [{"surface": 0, "source": "procedural:checker:2"}]
  })");
  const auto s = parse_scene(in, ".");
  EXPECT_EQ(s.camera.device.intrinsics.cx, 20.0);
  EXPECT_EQ(s.surfaces[0].id, 0);
  EXPECT_EQ(s.bounds.lower, 0.0);
  EXPECT_EQ(s.bounds.upper, 255.0);
  EXPECT_NEAR(s.projectors[0].device.center().y(), -0.05, 1e-15);
  EXPECT_TRUE(cast_projector_ray(s, 0, {16, 12}));
}

TEST(SceneIo, ErrorsAreReported) {
  std::istringstream broken("{ not json");
  EXPECT_THROW(parse_scene(broken, "."), Error);
  std::istringstream invalid(R"({
    "camera": {"resolution": [40, 30], "focal": 50},
    "projectors": [],
    "surfaces": [{"type": "plane", "point": [0, 0, 1], "normal": [0, 0, -1]}],
    "targets": []
  })");
  EXPECT_THROW(parse_scene(invalid, "."), Error);
  EXPECT_THROW(load_scene("/nonexistent/scene.json"), Error);
}

TEST(SceneIo, DepthMapFromTextAndPng) {
  const auto dir = scratch("depth");
  {
    std::ofstream f(dir / "d.txt");
    f << "# two rows\n1.0 1.5 2.0\n0.5 0.25 0.125\n";
  }
  const auto text = load_depth_map(dir / "d.txt", 2.0);
  ASSERT_EQ(text.rows(), 2);
  ASSERT_EQ(text.cols(), 3);
  EXPECT_EQ(text(0, 1), 3.0);
  EXPECT_EQ(text(1, 2), 0.25);
  Image raw(2, 2);
  raw << 1000, 2000, 3000, 65535;
  write_png16(dir / "d.png", raw);
  const auto png = load_depth_map(dir / "d.png", 0.001);
  EXPECT_NEAR(png(1, 0), 3.0, 1e-12);
  EXPECT_NEAR(png(1, 1), 65.535, 1e-12);
  {
    std::ofstream f(dir / "ragged.txt");
    f << "1 2 3\n4 5\n";
  }
  EXPECT_THROW(load_depth_map(dir / "ragged.txt"), Error);
}
