#include <gtest/gtest.h>

#include <sstream>

#include "depthproj/calib.hpp"
#include "depthproj/pipeline.hpp"
#include "depthproj/system.hpp"
#include "fixtures.hpp"

using namespace depthproj;

namespace {

const Eigen::Vector3d kToward(0, 0, -1);

std::vector<CorrespondenceMap> geometric_maps(const SceneDescription& s) {
  std::vector<CorrespondenceMap> maps;
  for (int j = 0; j < static_cast<int>(s.projectors.size()); ++j) {
    for (const int layer : s.layers()) maps.push_back(geometric_correspondences(s, j, layer));
  }
  return maps;
}

std::vector<TargetImage> constant_targets(const SceneDescription& s, double value) {
  std::vector<TargetImage> t;
  const auto& res = s.camera.device.resolution;
  for (const auto& surf : s.surfaces) t.push_back({surf.id, Image::Constant(res.height, res.width, value)});
  return t;
}

DemoParams small_demo() {
  DemoParams p;
  p.projector_width = 64;
  p.projector_height = 48;
  p.camera_width = 60;
  p.camera_height = 45;
  return p;
}

}  // namespace

TEST(Attenuation, Examples) {
  EXPECT_DOUBLE_EQ(attenuation_weight(1.0, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(attenuation_weight(2.0, 0.5), 8.0);
  EXPECT_THROW(attenuation_weight(1.0, 0.0), std::domain_error);
  EXPECT_THROW(attenuation_weight(1.0, -0.2), std::domain_error);
  EXPECT_THROW(attenuation_weight(0.0, 1.0), std::domain_error);
}

TEST(Attenuation, LinkWeightConventions) {
  const ProjectorLink unlit{};
  EXPECT_EQ(link_weight(unlit, 1.0, Convention::Verbatim, 1.0), 0.0);
  EXPECT_EQ(link_weight(unlit, 1.0, Convention::Physical, 1.0), 0.0);
  const ProjectorLink link{5, 2.0, 0.5};
  EXPECT_DOUBLE_EQ(link_weight(link, 1.0, Convention::Verbatim, 1.0), 8.0);
  EXPECT_DOUBLE_EQ(link_weight(link, 1.0, Convention::Physical, 1.0), 0.125);
  EXPECT_DOUBLE_EQ(link_weight(link, 0.5, Convention::Verbatim, 2.0), 0.5 * 2.0);
  // Fronto-parallel at the reference distance is the identity scene.
  EXPECT_DOUBLE_EQ(link_weight({1, 0.9, 1.0}, 1.0, Convention::Verbatim, 0.9), 1.0);
  EXPECT_DOUBLE_EQ(link_weight({1, 0.9, 1.0}, 1.0, Convention::Physical, 0.9), 1.0);
}

TEST(InverseProjection, PointLitByBothProjectorsHasTwoEntries) {
  const auto s = make_demo_scene(DemoKind::TwoPlanes, small_demo());
  const auto maps = geometric_maps(s);
  const auto q = build_inverse_projection(s, maps);
  const int centre = 22 * 60 + 30;
  EXPECT_GT(q.q(0, centre, 0), 0);
  EXPECT_GT(q.q(0, centre, 1), 0);
  EXPECT_NE(q.q(0, centre, 0), q.q(0, centre, 1));
}

TEST(InverseProjection, ShadowedPointHasZeroEntry) {
  // A small board at 0.5 m casts different shadows from the two projectors.
  Raster<double> board = Raster<double>::Constant(3, 3, 0.5);
  const auto s = fixture::scene(
      {fixture::device(64, 48, 48, fixture::at({0, -0.1, 0})), fixture::device(64, 48, 48, fixture::at({0, 0.1, 0}))},
      {fixture::plane(0, {0, 0, 1}, kToward), fixture::height_field(1, board, {-0.05, -0.05}, 0.05)},
      fixture::device(60, 45, 50));
  const auto maps = geometric_maps(s);
  const auto q = build_inverse_projection(s, maps);
  int shadowed = 0;
  for (int idx = 0; idx < 60 * 45; ++idx) {
    if (q.sample_at(0, idx) < 0) continue;
    const auto hit = cast_camera_ray(s, PinholeDevice::pixel_center(idx % 60, idx / 60));
    ASSERT_EQ(hit->surface, 0);
    for (int j = 0; j < 2; ++j) {
      if (!is_lit_by(s, j, hit->point, 0)) {
        EXPECT_EQ(q.q(0, idx, j), 0);
        ++shadowed;
      }
    }
  }
  EXPECT_GT(shadowed, 0);
}

TEST(InverseProjection, EmptyMapsGiveZeroQ) {
  const auto s = make_demo_scene(DemoKind::TwoPlanes, small_demo());
  const auto q = build_inverse_projection(s, {});
  for (std::size_t i = 0; i < q.samples().size(); ++i) {
    for (const auto& link : q.links(i)) EXPECT_EQ(link.pixel, 0);
  }
  EXPECT_FALSE(q.samples().empty());
  EXPECT_THROW(assemble(s, q, constant_targets(s, 100)), Error);
}

TEST(Assemble, TwoProjectorsTwoPlanesRowsHaveTwoEntries) {
  const auto s = make_demo_scene(DemoKind::TwoPlanes, small_demo());
  const auto maps = geometric_maps(s);
  const auto q = build_inverse_projection(s, maps);
  const auto sys = assemble(s, q, constant_targets(s, 100));
  EXPECT_EQ(sys.matrix.rows(), 2 * 60 * 45);
  EXPECT_TRUE(sys.infeasible.empty());
  for (Eigen::Index r = 0; r < sys.matrix.rows(); ++r) EXPECT_EQ(sys.matrix.row(r).nonZeros(), 2);
  EXPECT_EQ(sys.cols(), 2 * 64 * 48);
  EXPECT_EQ(sys.column_offsets, (std::vector<Eigen::Index>{0, 64 * 48, 2 * 64 * 48}));
}

TEST(Assemble, SingleProjectorIsDiagonalWeighted) {
  const auto s = fixture::scene({fixture::device(40, 30, 30)}, {fixture::plane(0, {0, 0, 1}, kToward)},
                                fixture::device(40, 30, 30));
  const auto maps = geometric_maps(s);
  const auto q = build_inverse_projection(s, maps);
  const auto sys = assemble(s, q, constant_targets(s, 50));
  std::vector<int> uses(static_cast<std::size_t>(sys.cols()), 0);
  for (Eigen::Index r = 0; r < sys.matrix.rows(); ++r) {
    ASSERT_EQ(sys.matrix.row(r).nonZeros(), 1);
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(sys.matrix, r); it; ++it) {
      ++uses[static_cast<std::size_t>(it.col())];
    }
  }
  // Co-located identical devices: a permutation, every column used once.
  EXPECT_EQ(*std::max_element(uses.begin(), uses.end()), 1);
}

TEST(Assemble, PixelOutsideAllFrustaIsInfeasible) {
  // Narrow projector, wide camera: the camera sees screen the projector cannot reach.
  const auto s = fixture::scene({fixture::device(20, 20, 80)}, {fixture::plane(0, {0, 0, 1}, kToward)},
                                fixture::device(40, 30, 20));
  const auto maps = geometric_maps(s);
  const auto q = build_inverse_projection(s, maps);
  const auto sys = assemble(s, q, constant_targets(s, 50));
  EXPECT_FALSE(sys.infeasible.empty());
  EXPECT_EQ(sys.infeasible.size() + sys.rows.size(), q.samples().size());
  const auto corner = sys.infeasible.front();
  EXPECT_EQ(q.q(corner.surface, corner.camera_index, 0), 0);
}

TEST(Assemble, RowSparsityAndDeterminism) {
  const auto s = make_demo_scene(DemoKind::HeadAndBox, small_demo());
  const auto maps = geometric_maps(s);
  const auto q1 = build_inverse_projection(s, maps, 1);
  const auto q3 = build_inverse_projection(s, maps, 3);
  const auto a = assemble(s, q1, constant_targets(s, 80));
  const auto b = assemble(s, q3, constant_targets(s, 80));
  for (Eigen::Index r = 0; r < a.matrix.rows(); ++r) EXPECT_LE(a.matrix.row(r).nonZeros(), 2);
  std::ostringstream ca, cb;
  write_coo(a, ca);
  write_coo(b, cb);
  EXPECT_EQ(ca.str(), cb.str());
}

TEST(Assemble, ConventionsAreReciprocal) {
  const auto s = make_demo_scene(DemoKind::TwoPlanes, small_demo());
  const auto maps = geometric_maps(s);
  const auto q = build_inverse_projection(s, maps);
  const auto verbatim = assemble(s, q, constant_targets(s, 10), Convention::Verbatim);
  const auto phys = assemble(s, q, constant_targets(s, 10), Convention::Physical);
  ASSERT_EQ(verbatim.matrix.nonZeros(), phys.matrix.nonZeros());
  for (Eigen::Index k = 0; k < verbatim.matrix.nonZeros(); ++k) {
    EXPECT_NEAR(verbatim.matrix.valuePtr()[k] * phys.matrix.valuePtr()[k], 1.0, 1e-12);
  }
}

TEST(Assemble, PatternPackingRoundTrip) {
  const auto s = make_demo_scene(DemoKind::TwoPlanes, small_demo());
  const auto maps = geometric_maps(s);
  const auto q = build_inverse_projection(s, maps);
  auto targets = constant_targets(s, 10);
  const auto sys = assemble(s, q, targets);
  const Eigen::VectorXd p = Eigen::VectorXd::LinSpaced(sys.cols(), -3, 300);
  const auto pats = scatter_patterns(sys, p);
  ASSERT_EQ(pats.size(), 2u);
  EXPECT_EQ(pats[1].pixels(0, 0), p(64 * 48));
  EXPECT_EQ(flatten_patterns(sys, pats), p);
  targets[1].pixels.setConstant(77);
  const auto rhs = gather_rhs(sys, targets);
  for (std::size_t r = 0; r < sys.rows.size(); ++r) {
    EXPECT_EQ(rhs(static_cast<Eigen::Index>(r)), sys.rows[r].surface == 1 ? 77.0 : 10.0);
  }
}

TEST(Assemble, CooDump) {
  SparseSystem sys;
  sys.matrix.resize(2, 3);
  sys.matrix.insert(0, 1) = 2.5;
  sys.matrix.insert(1, 2) = 1.0;
  sys.matrix.makeCompressed();
  std::ostringstream out;
  write_coo(sys, out);
  EXPECT_EQ(out.str(), "%%2 3 2\n0 1 2.5\n1 2 1\n");
}
