#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include "depthproj/calib.hpp"
#include "depthproj/gamma.hpp"
#include "fixtures.hpp"

using namespace depthproj;

namespace {

const Eigen::Vector3d kToward(0, 0, -1);

// Projector at the origin, camera shifted sideways, one screen at z = 1 that
// fills both frusta.
SceneDescription offset_pair_scene(double camera_shift = 0.05) {
  return fixture::scene({fixture::device(64, 48, 48)}, {fixture::plane(0, {0, 0, 1}, kToward)},
                        fixture::device(80, 60, 100, fixture::at({camera_shift, 0, 0})));
}

CorrespondenceMap smooth_map(int w, int h) {
  CorrespondenceMap m(0, 0, {w, h}, {2 * w, 2 * h});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      m.forward_x(y, x) = 2 * x;
      m.forward_y(y, x) = 2 * y;
    }
  }
  m.rebuild_inverse();
  return m;
}

}  // namespace

TEST(GrayCode, EncodeExamples) {
  EXPECT_EQ(gray_encode(0), 0u);
  EXPECT_EQ(gray_encode(5), 7u);
  EXPECT_EQ(gray_encode(1023), 512u);  // 1111111111 -> 1000000000
}

TEST(GrayCode, DecodeExamples) {
  EXPECT_EQ(gray_decode(0), 0u);
  EXPECT_EQ(gray_decode(7), 5u);
  EXPECT_EQ(gray_decode(512), 1023u);
}

TEST(GrayCode, RoundTripAndSingleBitSteps) {
  for (std::uint32_t v = 0; v <= 65535; ++v) {
    ASSERT_EQ(gray_decode(gray_encode(v)), v);
    if (v > 0) ASSERT_EQ(std::popcount(gray_encode(v) ^ gray_encode(v - 1)), 1);
  }
}

TEST(GrayCode, BitCount) {
  EXPECT_EQ(gray_bit_count(1), 1);
  EXPECT_EQ(gray_bit_count(2), 1);
  EXPECT_EQ(gray_bit_count(3), 2);
  EXPECT_EQ(gray_bit_count(256), 8);
  EXPECT_EQ(gray_bit_count(768), 10);
  EXPECT_EQ(gray_bit_count(1024), 10);
  EXPECT_EQ(gray_bit_count(1025), 11);
}

TEST(GrayCode, FramesEncodeCoordinateBits) {
  const auto seq = make_gray_code({20, 6}, Axis::X);
  ASSERT_EQ(seq.bits, 5);
  ASSERT_EQ(seq.frames.size(), 5u);
  for (int x = 0; x < 20; ++x) {
    std::uint32_t code = 0;
    for (int b = 0; b < seq.bits; ++b) {
      if (seq.frames[static_cast<std::size_t>(b)](3, x) == 255) code |= 1u << b;
      else EXPECT_EQ(seq.frames[static_cast<std::size_t>(b)](3, x), 0);
    }
    EXPECT_EQ(gray_decode(code), static_cast<std::uint32_t>(x));
  }
  const auto ys = make_gray_code({20, 6}, Axis::Y);
  EXPECT_EQ(ys.bits, 3);
  EXPECT_EQ(ys.frames[0](1, 0), 255);  // gray(1) = 1
}

TEST(Capture, WhiteIsPositiveBlackIsZero) {
  const auto s = offset_pair_scene();
  const auto model = build_capture_model(s, 0, 0);
  const Image white = simulate_capture(model, Image::Constant(48, 64, 255.0));
  const Image black = simulate_capture(model, Image::Zero(48, 64));
  EXPECT_EQ(black.cwiseAbs().maxCoeff(), 0.0);
  int lit = 0;
  for (Eigen::Index i = 0; i < white.size(); ++i) {
    if (model.source[static_cast<std::size_t>(i)] >= 0) {
      EXPECT_GT(white.data()[i], 0.0);
      ++lit;
    } else {
      EXPECT_EQ(white.data()[i], 0.0);
    }
  }
  EXPECT_GT(lit, 80 * 60 * 9 / 10);
  // Lambertian gain cos / d^2 on a fronto-parallel screen.
  const auto hit = cast_camera_ray(s, PinholeDevice::pixel_center(10, 7));
  const double d = hit->point.norm();
  EXPECT_NEAR(white(7, 10), 255.0 * (1.0 / d) / (d * d), 1e-9);
}

TEST(Capture, SplitPatternBoundaryFollowsPinholeMapping) {
  const double shift = 0.05;
  const auto s = offset_pair_scene(shift);
  Image pattern = Image::Zero(48, 64);
  pattern.leftCols(32).setConstant(255.0);
  const Image img = simulate_capture(s, 0, pattern, 0);
  // Projector column 32 casts the ray x = 0, meeting the screen at world x = 0,
  // which the camera sees at u = f * (0 - shift) / 1 + cx.
  const double boundary = 100.0 * (0.0 - shift) / 1.0 + 40.0;
  for (int y = 5; y < 55; y += 7) {
    for (int x = 0; x < 80; ++x) {
      const double u = x + 0.5;
      if (u < boundary - 1.0) EXPECT_GT(img(y, x), 0.0) << x;
      if (u > boundary + 1.0) EXPECT_EQ(img(y, x), 0.0) << x;
    }
  }
}

TEST(Decode, MatchesGeometricOracleOnFullScreen) {
  const auto s = offset_pair_scene();
  const auto truth = geometric_correspondences(s, 0, 0);
  const auto map = decode_correspondences(s, 0, 0, s.calibration);
  ASSERT_GT(truth.defined_count(), 0);
  Eigen::Index agree = 0, covered = 0;
  for (int y = 0; y < 60; ++y) {
    for (int x = 0; x < 80; ++x) {
      const auto t = truth.forward(x, y);
      if (!t) continue;
      ++covered;
      const auto m = map.forward(x, y);
      if (m && (*m - *t).cwiseAbs().maxCoeff() <= 1) ++agree;
    }
  }
  EXPECT_GT(static_cast<double>(agree), 0.99 * static_cast<double>(covered));
}

TEST(Decode, NoSurfacesIsDegenerate) {
  const auto s = fixture::scene({fixture::device(16, 16, 16)}, {}, fixture::device(16, 16, 16));
  EXPECT_THROW(decode_correspondences(s, 0, 0, s.calibration), Error);
}

TEST(Decode, InverseIsConsistentWithForward) {
  const auto s = offset_pair_scene();
  const auto map = decode_correspondences(s, 0, 0, s.calibration);
  for (int py = 0; py < 48; ++py) {
    for (int px = 0; px < 64; ++px) {
      const auto c = map.inverse(px, py);
      if (!c) continue;
      ASSERT_TRUE(map.camera.contains(c->x(), c->y()));
      const auto back = map.forward(c->x(), c->y());
      ASSERT_TRUE(back);
      EXPECT_LE((*back - Eigen::Vector2i(px, py)).cwiseAbs().maxCoeff(), 1);
    }
  }
}

TEST(FillHoles, SinglePixelHoleTakesNeighbourMedian) {
  auto m = smooth_map(10, 8);
  m.forward_x(4, 5) = kUndefined;
  m.forward_y(4, 5) = kUndefined;
  const auto f = fill_holes(m);
  // Neighbour x-values {8, 10, 12} in three rows: median 10; likewise y -> 8.
  EXPECT_EQ(f.forward_x(4, 5), 10);
  EXPECT_EQ(f.forward_y(4, 5), 8);
}

TEST(FillHoles, LargeRegionStaysUndefined) {
  auto m = smooth_map(60, 60);
  m.forward_x.block(10, 10, 40, 40).setConstant(kUndefined);
  m.forward_y.block(10, 10, 40, 40).setConstant(kUndefined);
  const auto f = fill_holes(m, {5, 10});
  EXPECT_EQ(f.forward_x(30, 30), kUndefined);
  EXPECT_EQ(f.forward_y(30, 30), kUndefined);
}

TEST(FillHoles, CompleteMapUnchanged) {
  const auto m = smooth_map(12, 9);
  const auto f = fill_holes(m);
  EXPECT_EQ(f.forward_x, m.forward_x);
  EXPECT_EQ(f.forward_y, m.forward_y);
  EXPECT_EQ(f.inverse_x, m.inverse_x);
  EXPECT_EQ(f.inverse_y, m.inverse_y);
}

TEST(CorrespondenceIo, RoundTrip) {
  const auto s = offset_pair_scene();
  const auto map = decode_correspondences(s, 0, 0, s.calibration);
  std::stringstream buf;
  write_correspondence_map(map, buf);
  const auto back = read_correspondence_map(buf);
  EXPECT_EQ(back.projector, map.projector);
  EXPECT_EQ(back.layer, map.layer);
  EXPECT_EQ(back.camera, map.camera);
  EXPECT_EQ(back.projector_resolution, map.projector_resolution);
  EXPECT_EQ(back.forward_x, map.forward_x);
  EXPECT_EQ(back.forward_y, map.forward_y);
  EXPECT_EQ(back.inverse_x, map.inverse_x);
  EXPECT_EQ(back.inverse_y, map.inverse_y);
}

TEST(CorrespondenceIo, RejectsGarbage) {
  std::stringstream buf("not a map at all");
  EXPECT_THROW(read_correspondence_map(buf), Error);
}

TEST(GammaFit, IdentityResponse) {
  ProjectorModel p;
  const auto fit = fit_gamma(measure_response(p, 0, 32));
  EXPECT_NEAR(fit.model.a, 1.0, 1e-6);
  EXPECT_NEAR(fit.model.b, 1.0, 1e-6);
  EXPECT_NEAR(fit.model.c, 0.0, 1e-6);
}

TEST(GammaFit, RecoversPowerLaw) {
  ProjectorModel p;
  p.gamma = {GammaModel{0.8, 2.2, 3.0}};
  const auto fit = fit_gamma(measure_response(p, 0, 32));
  EXPECT_NEAR(fit.model.a, 0.8, 0.8e-3);
  EXPECT_NEAR(fit.model.b, 2.2, 2.2e-3);
  EXPECT_NEAR(fit.model.c, 3.0, 3.0e-3);
}

TEST(GammaFit, TooFewSamples) {
  const std::vector<GammaSample> s{{0, 0}, {128, 128}, {255, 255}};
  EXPECT_THROW(fit_gamma(s), Error);
}

TEST(GammaFit, NonMonotoneSamples) {
  std::vector<GammaSample> s;
  for (int i = 0; i < 16; ++i) s.push_back({17.0 * i, i < 8 ? 10.0 * i : 200.0 - 10.0 * i});
  EXPECT_THROW(fit_gamma(s), Error);
}

TEST(GammaFit, NarrowSpan) {
  std::vector<GammaSample> s;
  for (int i = 0; i < 16; ++i) s.push_back({100.0 + i, 100.0 + i});
  EXPECT_THROW(fit_gamma(s), Error);
}

TEST(GammaInvert, Examples) {
  EXPECT_NEAR(invert_gamma(GammaModel{}, 128), 128.0, 1e-12);
  EXPECT_NEAR(invert_gamma(GammaModel{1, 2, 0}, 100), 10.0, 1e-12);
  EXPECT_EQ(invert_gamma(GammaModel{1, 2, 5}, 3), 0.0);
  EXPECT_EQ(invert_gamma(GammaModel{1, 1, 0}, 1e6), 255.0);
}

TEST(GammaInvert, ComposesToIdentity) {
  const GammaModel g{0.8, 2.2, 3.0};
  for (double x = 0; x <= 255; x += 5) EXPECT_NEAR(invert_gamma(g, g(x)), x, 1e-9);
  for (double l = 0; l <= 255; l += 5) {
    const double emitted = g(compensate(g, l));
    EXPECT_NEAR((emitted - g(0)) / (g(255) - g(0)) * 255.0, l, 1e-9);
  }
}
