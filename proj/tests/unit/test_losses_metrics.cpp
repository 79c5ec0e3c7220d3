#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tstereo/error.hpp"
#include "tstereo/losses_metrics.hpp"

using namespace tstereo;

namespace {

CameraModel small_camera(int w, int h) { return CameraModel{80.0, 80.0, (w - 1) / 2.0, (h - 1) / 2.0, 0.2, w, h}; }

}  // namespace

TEST(Losses, PsiExamplesAndDomain) {
  const std::vector<double> c{0.1, 0.2, 0.8, 0.6, 0.3};
  EXPECT_DOUBLE_EQ(psi(c, 2.0), 0.8);
  EXPECT_NEAR(psi(c, 2.5), 0.7, 1e-15);
  EXPECT_NEAR(psi(c, 2.25), 0.75, 1e-15);
  EXPECT_DOUBLE_EQ(psi(c, 4.0), 0.3);
  EXPECT_THROW(psi(c, -0.1), DomainError);
  EXPECT_THROW(psi(c, 4.01), DomainError);
}

TEST(LossesProperty, PsiIsPiecewiseLinear) {
  fixture::Rng rng(51);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto col = fixture::random_column(12, rng);
    const int cell = trial % 11;
    const double d1 = cell + uni(rng), d2 = cell + uni(rng), a = uni(rng);
    ASSERT_NEAR(psi(col, a * d1 + (1 - a) * d2), a * psi(col, d1) + (1 - a) * psi(col, d2), 1e-12);
  }
}

TEST(LossesProperty, CostVolumeLossMatchesEnumerationOracle) {
  fixture::Rng rng(52);
  std::uniform_real_distribution<double> gt(0.0, 15.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto col = fixture::random_column(16, rng);
    const double g = trial % 10 == 0 ? std::round(gt(rng)) : gt(rng);
    const auto ours = cost_volume_loss_pixel(col, g, 0.5);
    const auto ref = oracle::cost_volume_loss_pixel(col, g, 0.5);
    ASSERT_EQ(ours.has_value(), ref.has_value());
    if (ref) ASSERT_NEAR(*ours, *ref, 1e-12);
    if (ref) ASSERT_GE(*ours, 0.0);
  }
}

TEST(Losses, CostVolumeLossExamplesAndErrors) {
  // psi(gt)=1 and every other hypothesis 0.4: loss 0.
  CostVolume c(1, 1, 8, 0.4);
  c.at(0, 0, 3) = 1.0;
  DisparityMap gt(1, 1, 3.0);
  Mask valid(1, 1, 1);
  EXPECT_DOUBLE_EQ(cost_volume_loss(c, gt, valid, 0.5), 0.0);
  c.at(0, 0, 3) = 0.6;
  c.at(0, 0, 7) = 0.5;
  EXPECT_NEAR(cost_volume_loss(c, gt, valid, 0.5), 0.8, 1e-12);
  valid(0, 0) = 0;
  EXPECT_THROW(cost_volume_loss(c, gt, valid, 0.5), UndefinedLossError);
  valid(0, 0) = 1;
  gt(0, 0) = 7.5;  // beyond D - 1: skipped
  EXPECT_THROW(cost_volume_loss(c, gt, valid, 0.5), UndefinedLossError);
}

TEST(LossesProperty, DisparityLossMatchesScalarOracle) {
  fixture::Rng rng(53);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 1 + trial % 8, h = 1 + (trial / 8) % 8, n = trial % 6;
    const DisparityMap gt = fixture::random_map(w, h, 0.0, 16.0, rng);
    Mask valid = fixture::random_mask(w, h, 0.7, rng);
    valid(0, 0) = 1;
    const DisparityMap dc = fixture::random_map(w, h, 0.0, 16.0, rng);
    std::vector<DisparityMap> dsr, gdp;
    for (int i = 0; i < n; ++i) {
      dsr.push_back(fixture::random_map(w, h, 0.0, 16.0, rng));
      gdp.push_back(fixture::random_map(w, h, 0.0, 16.0, rng));
    }
    const LossWeights lw;
    const double ours = disparity_loss(dc, dsr, gdp, gt, valid, lw);
    const double ref = oracle::disparity_loss(dc, dsr, gdp, gt, valid, lw.gamma, lw.lambda_dc, lw.lambda_gdp);
    ASSERT_NEAR(ours, ref, 1e-9);
  }
}

TEST(LossesProperty, GradientLossMatchesScalarOracle) {
  fixture::Rng rng(54);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 2 + trial % 7, h = 2 + (trial / 7) % 7;
    const DisparityMap gt = fixture::random_map(w, h, 0.0, 16.0, rng);
    Mask valid = fixture::random_mask(w, h, 0.8, rng);
    valid(0, 0) = valid(1, 0) = valid(0, 1) = 1;
    const GradientField g{fixture::random_map(w, h, -2, 2, rng), fixture::random_map(w, h, -2, 2, rng)};
    const DisparityMap gdp = fixture::random_map(w, h, 0.0, 16.0, rng);
    ASSERT_NEAR(gradient_loss(g, gdp, gt, valid), oracle::gradient_loss(g.du, g.dv, gdp, gt, valid), 1e-9);
  }
}

TEST(Losses, GradientLossExamples) {
  DisparityMap gt(6, 5);
  for (int v = 0; v < 5; ++v)
    for (int u = 0; u < 6; ++u) gt(u, v) = 2.0 + 0.5 * u - 0.25 * v;
  const Mask valid(6, 5, 1);
  GradientField g{Image<double>(6, 5, 0.5), Image<double>(6, 5, -0.25)};
  EXPECT_NEAR(gradient_loss(g, gt, gt, valid), 0.0, 1e-15);
  for (double& x : g.du.pixels()) x += 0.1;
  EXPECT_NEAR(gradient_loss(g, gt, gt, valid), 0.1, 1e-12);
  EXPECT_THROW(gradient_loss(g, gt, gt, Mask(6, 5, 0)), UndefinedLossError);
}

TEST(Losses, CombinationAndTotal) {
  const LossWeights lw;
  const std::vector<double> one{0.5}, gdp{0.5};
  EXPECT_NEAR(combine_disparity_loss(1.0, one, gdp, lw), 1.2, 1e-12);
  const std::vector<double> two{1.0, 0.0}, zero{0.0, 0.0};
  EXPECT_NEAR(combine_disparity_loss(0.0, two, zero, lw), 0.9, 1e-12);
  EXPECT_DOUBLE_EQ(total_loss(0.2, 1.2, 0.1), 1.5);
  EXPECT_DOUBLE_EQ(total_loss(0.1, 0.2, 1.2), total_loss(1.2, 0.1, 0.2));
  LossWeights bad;
  bad.gamma = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Metrics, AccuracyExamples) {
  DisparityMap gt(2, 2, 10.0);
  DisparityMap d = gt;
  const Mask all(2, 2, 1);
  const auto zero = accuracy_metrics(d, gt, all);
  ASSERT_TRUE(zero);
  EXPECT_EQ(zero->epe, 0.0);
  d(1, 1) = 14.0;
  const auto m = accuracy_metrics(d, gt, all);
  EXPECT_DOUBLE_EQ(m->epe, 1.0);
  EXPECT_DOUBLE_EQ(m->bad3, 25.0);
  EXPECT_DOUBLE_EQ(m->bad1, 25.0);
  EXPECT_FALSE(accuracy_metrics(d, gt, Mask(2, 2, 0)).has_value());

  DisparityMap g100(1, 1, 100.0);
  DisparityMap p(1, 1, 104.0);
  EXPECT_DOUBLE_EQ(accuracy_metrics(p, g100, Mask(1, 1, 1))->d1, 0.0);
  p(0, 0) = 106.0;
  EXPECT_DOUBLE_EQ(accuracy_metrics(p, g100, Mask(1, 1, 1))->d1, 100.0);
}

TEST(MetricsProperty, AccuracyInvariantToPixelOrder) {
  fixture::Rng rng(55);
  const DisparityMap gt = fixture::random_map(16, 1, 1.0, 30.0, rng);
  const DisparityMap d = fixture::random_map(16, 1, 1.0, 30.0, rng);
  DisparityMap gt_r(16, 1), d_r(16, 1);
  for (int u = 0; u < 16; ++u) {
    gt_r(u, 0) = gt(15 - u, 0);
    d_r(u, 0) = d(15 - u, 0);
  }
  const auto a = accuracy_metrics(d, gt, Mask(16, 1, 1));
  const auto b = accuracy_metrics(d_r, gt_r, Mask(16, 1, 1));
  EXPECT_NEAR(a->epe, b->epe, 1e-12);
  EXPECT_EQ(a->bad3, b->bad3);
}

TEST(Metrics, TemporalStaticAndShrinkingErrors) {
  const int w = 6, h = 4;
  const CameraModel cam = small_camera(w, h);
  fixture::Rng rng(56);
  const DisparityMap gt = fixture::random_map(w, h, 2.0, 10.0, rng);
  const DisparityMap d = fixture::random_map(w, h, 2.0, 10.0, rng);
  TemporalAlignment align{Image<double>(w, h, 0.0), Image<double>(w, h, 0.0), Mask(w, h, 1), Pose::identity(), cam};
  const auto s = temporal_metrics(d, d, align, gt, gt, Mask(w, h, 1));
  ASSERT_TRUE(s);
  EXPECT_NEAR(s->abs_dd, 0.0, 1e-12);
  EXPECT_NEAR(s->relu_de, 0.0, 1e-12);

  DisparityMap better = d;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) better(u, v) = gt(u, v) + 0.5 * (d(u, v) - gt(u, v));
  const auto m = temporal_metrics(d, better, align, gt, gt, Mask(w, h, 1));
  EXPECT_NEAR(m->relu_de, 0.0, 1e-12);
  EXPECT_GT(m->abs_dd, 0.0);
}

TEST(MetricsProperty, TemporalMatchesScalarOracle) {
  fixture::Rng rng(57);
  std::uniform_real_distribution<double> flow(-2.5, 2.5);
  std::uniform_real_distribution<double> small(-0.05, 0.05);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 2 + trial % 7, h = 2 + (trial / 7) % 7;
    const CameraModel cam = small_camera(w, h);
    const DisparityMap d_t = fixture::random_map(w, h, 1.0, 16.0, rng);
    const DisparityMap d_t1 = fixture::random_map(w, h, 1.0, 16.0, rng);
    const DisparityMap gt_t = fixture::random_map(w, h, 1.0, 16.0, rng);
    const DisparityMap gt_t1 = fixture::random_map(w, h, 1.0, 16.0, rng);
    Image<double> fu(w, h), fv(w, h);
    for (double& x : fu.pixels()) x = flow(rng);
    for (double& x : fv.pixels()) x = flow(rng);
    const Mask fvalid = fixture::random_mask(w, h, 0.8, rng);
    const Mask region = fixture::random_mask(w, h, 0.8, rng);
    const Eigen::Matrix3d r = Eigen::AngleAxisd(small(rng), Eigen::Vector3d(0.2, 1.0, 0.1).normalized()).toRotationMatrix();
    const Eigen::Vector3d t(small(rng), small(rng), small(rng));
    const TemporalAlignment align{fu, fv, fvalid, Pose(r, t), cam};
    const auto ours = temporal_metrics(d_t, d_t1, align, gt_t, gt_t1, region);
    const auto ref = oracle::temporal(d_t, d_t1, fu, fv, fvalid, r, t, cam, gt_t, gt_t1, region);
    ASSERT_EQ(ours.has_value(), ref.has_value()) << "trial " << trial;
    if (!ref) continue;
    ASSERT_EQ(ours->n_pixels, ref->n);
    ASSERT_NEAR(ours->abs_dd, ref->abs_dd, 1e-9);
    ASSERT_NEAR(ours->relu_de, ref->relu_de, 1e-9);
  }
}

TEST(Metrics, TemporalTwoByTwoHandFixture) {
  // Flow (+1, 0) from column 0 to column 1; static camera.
  const CameraModel cam = small_camera(2, 2);
  DisparityMap d_t(2, 2), d_t1(2, 2), gt_t(2, 2), gt_t1(2, 2);
  d_t(0, 0) = 4.0;  gt_t(0, 0) = 5.0;
  d_t(0, 1) = 6.0;  gt_t(0, 1) = 6.5;
  d_t1(1, 0) = 4.5; gt_t1(1, 0) = 5.0;
  d_t1(1, 1) = 7.5; gt_t1(1, 1) = 6.5;
  Mask fvalid(2, 2, 0);
  fvalid(0, 0) = fvalid(0, 1) = 1;
  const TemporalAlignment align{Image<double>(2, 2, 1.0), Image<double>(2, 2, 0.0), fvalid, Pose::identity(), cam};
  const auto m = temporal_metrics(d_t, d_t1, align, gt_t, gt_t1, Mask(2, 2, 1));
  ASSERT_TRUE(m);
  EXPECT_EQ(m->n_pixels, 2u);
  // |dd| = (0.5 + 1.5) / 2; errors 1 -> 0.5 and 0.5 -> 1.0 give relu (0 + 0.5) / 2.
  EXPECT_NEAR(m->abs_dd, 1.0, 1e-12);
  EXPECT_NEAR(m->relu_de, 0.25, 1e-12);
  const auto ref = oracle::temporal(d_t, d_t1, align.flow_u, align.flow_v, fvalid, Eigen::Matrix3d::Identity(),
                                    Eigen::Vector3d::Zero(), cam, gt_t, gt_t1, Mask(2, 2, 1));
  EXPECT_NEAR(ref->abs_dd, m->abs_dd, 1e-12);
  EXPECT_NEAR(ref->relu_de, m->relu_de, 1e-12);
}

TEST(MetricsProperty, ReluNeverExceedsAbsoluteErrorChange) {
  fixture::Rng rng(58);
  const int w = 7, h = 5;
  const CameraModel cam = small_camera(w, h);
  for (int trial = 0; trial < 50; ++trial) {
    const DisparityMap d_t = fixture::random_map(w, h, 1.0, 16.0, rng);
    const DisparityMap d_t1 = fixture::random_map(w, h, 1.0, 16.0, rng);
    const DisparityMap gt = fixture::random_map(w, h, 1.0, 16.0, rng);
    const TemporalAlignment align{Image<double>(w, h, 0.0), Image<double>(w, h, 0.0), Mask(w, h, 1),
                                  Pose::identity(), cam};
    const auto m = temporal_metrics(d_t, d_t1, align, gt, gt, Mask(w, h, 1));
    double abs_change = 0.0;
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u)
        abs_change += std::abs(std::abs(d_t1(u, v) - gt(u, v)) - std::abs(d_t(u, v) - gt(u, v)));
    ASSERT_LE(m->relu_de, abs_change / (w * h) + 1e-12);
  }
}

TEST(Metrics, NearestSamplingUsesRoundedTarget) {
  const CameraModel cam = small_camera(3, 1);
  DisparityMap d_t(3, 1, 5.0), d_t1(3, 1), gt(3, 1, 5.0);
  d_t1(0, 0) = 5.0;
  d_t1(1, 0) = 7.0;
  d_t1(2, 0) = 9.0;
  TemporalAlignment align{Image<double>(3, 1, 0.0), Image<double>(3, 1, 0.0), Mask(3, 1, 0), Pose::identity(), cam};
  align.flow_u(0, 0) = 0.6;
  align.flow_valid(0, 0) = 1;
  const auto bil = temporal_metrics(d_t, d_t1, align, gt, DisparityMap(3, 1, 5.0), Mask(3, 1, 1));
  EXPECT_NEAR(bil->abs_dd, 1.2, 1e-12);
  align.sampling = FlowSampling::nearest;
  const auto near = temporal_metrics(d_t, d_t1, align, gt, DisparityMap(3, 1, 5.0), Mask(3, 1, 1));
  EXPECT_NEAR(near->abs_dd, 2.0, 1e-12);
}
