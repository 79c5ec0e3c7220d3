#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "tstereo/error.hpp"
#include "tstereo/synthetic.hpp"

using namespace tstereo;

namespace {

SceneSpec fronto_parallel(int frames) {
  SceneSpec spec;
  spec.camera = CameraModel{100.0, 100.0, 23.5, 15.5, 0.5, 48, 32};
  spec.max_disparity = 16;
  spec.planes = {ScenePlane{Eigen::Vector3d::UnitZ(), 10.0, Texture{TextureKind::noise, 3, 0.05}, std::nullopt}};
  spec.trajectory.assign(static_cast<std::size_t>(frames), Pose::identity());
  return spec;
}

// Back wall plus a nearer wall filling the right half of the view from
// x = 0 on; the camera slides right so the near wall's edge sweeps over
// background.
SceneSpec two_plane_lateral() {
  SceneSpec spec;
  spec.camera = CameraModel{120.0, 120.0, 39.5, 29.5, 0.2, 80, 60};
  spec.max_disparity = 32;
  spec.planes = {
      ScenePlane{Eigen::Vector3d::UnitZ(), 6.0, Texture{TextureKind::noise, 5, 0.05}, std::nullopt},
      ScenePlane{Eigen::Vector3d::UnitZ(), 2.5, Texture{TextureKind::checker, 6, 0.1},
                 PlaneBounds{Eigen::Vector3d(1.5, 0.0, 2.5), 1.5, 3.0}},
  };
  spec.trajectory = {Pose::identity(), Pose::from_translation({0.15, 0.0, 0.0})};
  return spec;
}

}  // namespace

TEST(Synthetic, FrontoParallelPlaneHasConstantDisparity) {
  const SyntheticFrame f = generate_frame(fronto_parallel(1), 0);
  for (double d : f.gt_disparity.pixels()) EXPECT_NEAR(d, 5.0, 1e-12);
  EXPECT_FALSE(f.has_next);
  EXPECT_TRUE(f.flow_u.empty());
}

TEST(Synthetic, StaticCameraHasZeroFlowAndNoTemporalOcclusion) {
  const SyntheticFrame f = generate_frame(fronto_parallel(2), 0);
  ASSERT_TRUE(f.has_next);
  for (double x : f.flow_u.pixels()) EXPECT_NEAR(x, 0.0, 1e-9);
  for (double x : f.flow_v.pixels()) EXPECT_NEAR(x, 0.0, 1e-9);
  for (auto m : f.temporal_occlusion.pixels()) EXPECT_EQ(m, 0);
}

TEST(Synthetic, TemporalOcclusionMatchesDoubleProjectionOracle) {
  const SceneSpec spec = two_plane_lateral();
  // The fixture relies on s = X, t = Y for a +Z normal.
  const auto [s_axis, t_axis] = plane_axes(Eigen::Vector3d::UnitZ());
  ASSERT_NEAR(std::abs(s_axis.x()), 1.0, 1e-12);
  ASSERT_NEAR(std::abs(t_axis.y()), 1.0, 1e-12);

  const SyntheticFrame f = generate_frame(spec, 0);
  int ours = 0;
  for (auto m : f.temporal_occlusion.pixels()) ours += m;
  // Within the view the bounded wall only ends at x = 0 (other edges project
  // far outside the image), so a single clip half-space describes it.
  const std::vector<oracle::InfinitePlane> planes{
      {Eigen::Vector3d::UnitZ(), 6.0},
      {Eigen::Vector3d::UnitZ(), 2.5, Eigen::Vector3d(-1.0, 0.0, 0.0), 0.0},
  };
  const int expected =
      oracle::temporal_occlusion_count(planes, spec.camera, spec.trajectory[0], spec.trajectory[1], 1e-4);
  EXPECT_EQ(ours, expected);
  // Edge parallax is 120 * 0.15 * (1/2.5 - 1/6) = 4.2 px over 60 rows.
  EXPECT_GE(ours, 4 * 60);
  EXPECT_LT(ours, 5 * 60 + 1);
}

TEST(SyntheticProperty, LeftRightPhotometricConsistency) {
  const SceneSpec spec = standard_scene({});
  const SyntheticFrame f = generate_frame(spec, 3);
  int checked = 0;
  for (int v = 0; v < spec.camera.height; ++v)
    for (int u = 0; u < spec.camera.width; ++u) {
      if (f.stereo_occlusion(u, v)) continue;
      const double ur = u - f.gt_disparity(u, v);
      const double rendered = render_intensity(spec, right_camera_pose(spec, f.frame.pose), ur, v);
      ASSERT_NEAR(rendered, f.frame.left(u, v), 1e-9) << u << "," << v;
      ++checked;
    }
  EXPECT_GT(checked, spec.camera.width * spec.camera.height * 9 / 10);
}

TEST(SyntheticProperty, DeterministicUnderFixedSeed) {
  StandardSceneOptions opt;
  opt.noise_sigma = 0.02;
  const SyntheticFrame a = generate_frame(standard_scene(opt), 2);
  const SyntheticFrame b = generate_frame(standard_scene(opt), 2);
  EXPECT_TRUE(a.frame.left == b.frame.left);
  EXPECT_TRUE(a.frame.right == b.frame.right);
  opt.seed = 8;
  const SyntheticFrame c = generate_frame(standard_scene(opt), 2);
  EXPECT_FALSE(a.frame.left == c.frame.left);
}

TEST(Synthetic, OcclusionIsUnionOfStereoAndTemporal) {
  const SyntheticFrame f = generate_frame(standard_scene({}), 0);
  int stereo = 0, temporal = 0;
  for (int v = 0; v < f.occlusion.height(); ++v)
    for (int u = 0; u < f.occlusion.width(); ++u) {
      ASSERT_EQ(f.occlusion(u, v), (f.stereo_occlusion(u, v) || f.temporal_occlusion(u, v)) ? 1 : 0);
      stereo += f.stereo_occlusion(u, v);
      temporal += f.temporal_occlusion(u, v);
    }
  EXPECT_GT(stereo, 0);
  EXPECT_GT(temporal, 0);
}

TEST(Synthetic, SpecValidation) {
  SceneSpec spec = fronto_parallel(1);
  spec.max_disparity = 5;  // d = 5 would reach it
  EXPECT_THROW(generate_frame(spec, 0), ConfigError);
  spec = fronto_parallel(1);
  spec.planes[0].normal = Eigen::Vector3d::UnitX();  // parallel to the optical axis: gaps
  EXPECT_THROW(generate_frame(spec, 0), ConfigError);
  spec = fronto_parallel(1);
  spec.trajectory.clear();
  EXPECT_THROW(validate_scene(spec), ConfigError);
  EXPECT_THROW(generate_frame(fronto_parallel(1), 1), ConfigError);
}

TEST(Synthetic, StandardSceneShape) {
  const SceneSpec spec = standard_scene({});
  EXPECT_EQ(spec.camera.width, 192);
  EXPECT_EQ(spec.camera.height, 128);
  EXPECT_EQ(spec.max_disparity, 64);
  EXPECT_EQ(spec.planes.size(), 3u);
  EXPECT_EQ(spec.frame_count(), 8);
  const SyntheticFrame f = generate_frame(spec, 7);
  double lo = 1e9, hi = 0;
  for (double d : f.gt_disparity.pixels()) {
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi, 64.0);
}
