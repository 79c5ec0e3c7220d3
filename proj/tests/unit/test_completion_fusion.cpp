#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tstereo/completion.hpp"
#include "tstereo/error.hpp"
#include "tstereo/fusion.hpp"

using namespace tstereo;

namespace {

SemiDenseDisparity ramp_with_hole(int w, int h, int hole_u, int hole_v, int hole) {
  SemiDenseDisparity semi{DisparityMap(w, h), Mask(w, h, 1)};
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) semi.values(u, v) = 0.5 * u;
  for (int v = hole_v; v < hole_v + hole; ++v)
    for (int u = hole_u; u < hole_u + hole; ++u) {
      semi.values(u, v) = 0.0;
      semi.valid(u, v) = 0;
    }
  return semi;
}

double max_fill_error(const DisparityMap& filled, const SemiDenseDisparity& semi) {
  double worst = 0.0;
  for (int v = 0; v < filled.height(); ++v)
    for (int u = 0; u < filled.width(); ++u)
      if (!semi.valid(u, v)) worst = std::max(worst, std::abs(filled(u, v) - 0.5 * u));
  return worst;
}

const FeatureMap kNoContext{};

}  // namespace

TEST(Completion, RampHoleWithinRecursiveOracleBound) {
  const SemiDenseDisparity semi = ramp_with_hole(24, 20, 9, 7, 5);
  const DisparityMap ref = oracle::pull_push(semi.values, semi.valid);
  const double bound = max_fill_error(ref, semi);
  const DisparityMap ours = pull_push_fill(semi);
  EXPECT_LE(max_fill_error(ours, semi), bound + 1e-12);
  // Both follow the same averaging rule, so they agree pixel for pixel.
  for (int v = 0; v < 20; ++v)
    for (int u = 0; u < 24; ++u) ASSERT_NEAR(ours(u, v), ref(u, v), 1e-12);
  // Recorded bound from the oracle: 0.5 px on this 24x20 fixture.
  EXPECT_LE(bound, 0.5 + 1e-12);
}

TEST(CompletionProperty, MatchesRecursiveOracleOnRandomMasks) {
  fixture::Rng rng(21);
  std::uniform_int_distribution<int> size(1, 23);
  std::uniform_real_distribution<double> density(0.02, 0.9);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = size(rng), h = size(rng);
    SemiDenseDisparity semi{fixture::random_map(w, h, 0.0, 30.0, rng), fixture::random_mask(w, h, density(rng), rng)};
    if (semi.valid_count() == 0) semi.valid(0, 0) = 1;
    const DisparityMap ours = pull_push_fill(semi);
    const DisparityMap ref = oracle::pull_push(semi.values, semi.valid);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) ASSERT_NEAR(ours(u, v), ref(u, v), 1e-9) << "trial " << trial;
  }
}

TEST(CompletionProperty, OutputWithinInputRangeAndValidPreserved) {
  fixture::Rng rng(22);
  for (int trial = 0; trial < 60; ++trial) {
    SemiDenseDisparity semi{fixture::random_map(17, 13, 2.0, 9.0, rng), fixture::random_mask(17, 13, 0.3, rng)};
    if (semi.valid_count() == 0) semi.valid(3, 3) = 1;
    double lo = 1e300, hi = -1e300;
    for (int v = 0; v < 13; ++v)
      for (int u = 0; u < 17; ++u)
        if (semi.valid(u, v)) {
          lo = std::min(lo, semi.values(u, v));
          hi = std::max(hi, semi.values(u, v));
        }
    const CompletionOutput out = complete(semi, kNoContext);
    for (int v = 0; v < 13; ++v)
      for (int u = 0; u < 17; ++u) {
        const double x = out.dense(u, v);
        if (semi.valid(u, v)) {
          ASSERT_EQ(x, semi.values(u, v));
        } else {
          ASSERT_GE(x, lo - 1e-12);
          ASSERT_LE(x, hi + 1e-12);
        }
      }
  }
}

TEST(CompletionProperty, IdempotentOnDenseInput) {
  fixture::Rng rng(23);
  SemiDenseDisparity semi{fixture::random_map(11, 9, 0.0, 5.0, rng), Mask(11, 9, 1)};
  const CompletionOutput once = complete(semi, kNoContext);
  EXPECT_TRUE(once.dense == semi.values);
  const CompletionOutput twice = complete({once.dense, Mask(11, 9, 1)}, kNoContext);
  EXPECT_TRUE(twice.dense == once.dense);
}

TEST(CompletionProperty, MoreValidPixelsNeverIncreaseErrorOnPlane) {
  // Nested masks on a fixed plane: growing the valid set must not hurt.
  fixture::Rng rng(24);
  const int w = 32, h = 24;
  DisparityMap plane(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) plane(u, v) = 3.0 + 0.25 * u + 0.1 * v;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const DisparityMap order = fixture::random_map(w, h, 0.0, 1.0, rng);
  // Nested masks from thresholds on one random field.
  auto err_at = [&](double keep) {
    SemiDenseDisparity semi{plane, Mask(w, h, 0)};
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u)
        if (order(u, v) < keep) semi.valid(u, v) = 1;
    const DisparityMap f = pull_push_fill(semi);
    double e = 0.0;
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) e += std::abs(f(u, v) - plane(u, v));
    return e / (w * h);
  };
  std::vector<double> errors;
  for (double keep : {0.2, 0.4, 0.6, 0.8, 1.0}) errors.push_back(err_at(keep));
  for (std::size_t i = 1; i < errors.size(); ++i) EXPECT_LE(errors[i], errors[i - 1] + 1e-12) << i;
  EXPECT_EQ(errors.back(), 0.0);
}

TEST(Completion, StateChannels) {
  SemiDenseDisparity semi{DisparityMap(8, 6, 16.0), Mask(8, 6, 1)};
  semi.valid(0, 0) = 0;
  CompletionConfig cfg;
  cfg.state_channels = 5;
  cfg.disparity_scale = 32.0;
  cfg.distance_clamp = 4.0;
  const CompletionOutput out = complete(semi, kNoContext, cfg);
  ASSERT_EQ(out.state.feature_count(), 5);
  EXPECT_DOUBLE_EQ(out.state.channels(3, 3, 0), 0.5);
  EXPECT_DOUBLE_EQ(out.state.channels(0, 0, 1), 0.25);  // distance 1 / clamp 4
  EXPECT_DOUBLE_EQ(out.state.channels(5, 5, 1), 0.0);
  EXPECT_DOUBLE_EQ(out.state.channels(3, 3, 4), 0.0);
  for (auto x : out.state.valid.pixels()) EXPECT_EQ(x, 1);
}

TEST(Completion, DistanceTransformIsExactEuclidean) {
  fixture::Rng rng(25);
  const Mask m = fixture::random_mask(19, 14, 0.05, rng);
  const Image<double> dist = distance_to_valid(m);
  for (int v = 0; v < 14; ++v)
    for (int u = 0; u < 19; ++u) {
      double best = std::numeric_limits<double>::infinity();
      for (int y = 0; y < 14; ++y)
        for (int x = 0; x < 19; ++x)
          if (m(x, y)) best = std::min(best, std::hypot(double(x - u), double(y - v)));
      ASSERT_NEAR(dist(u, v), best, 1e-12);
    }
}

TEST(Completion, EmptyHintAndBadConfig) {
  SemiDenseDisparity empty{DisparityMap(4, 4), Mask(4, 4, 0)};
  EXPECT_THROW(complete(empty, kNoContext), EmptyHintError);
  SemiDenseDisparity one{DisparityMap(4, 4), Mask(4, 4, 1)};
  CompletionConfig cfg;
  cfg.state_channels = 2;
  EXPECT_THROW(complete(one, kNoContext, cfg), ConfigError);
}

// Closed ranges: the logistic saturates to exactly 1 in double precision.
TEST(FusionProperty, GatesInRangeAndOutputBetweenCandidateAndState) {
  fixture::Rng rng(31);
  std::uniform_real_distribution<double> val(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int f = 3 + trial % 6;
    const FusionWeights w = FusionWeights::random(f, rng(), 0.5 + (trial % 4));
    std::vector<double> c(f), h(f);
    for (auto& x : c) x = val(rng);
    for (auto& x : h) x = val(rng);
    const GateValues g = fuse_pixel(c, h, w);
    for (int i = 0; i < f; ++i) {
      ASSERT_GE(g.z[i], 0.0);
      ASSERT_LE(g.z[i], 1.0);
      ASSERT_GE(g.r[i], 0.0);
      ASSERT_LE(g.r[i], 1.0);
      ASSERT_GE(g.q[i], -1.0);
      ASSERT_LE(g.q[i], 1.0);
      ASSERT_GE(g.h[i], std::min(c[i], g.q[i]) - 1e-15);
      ASSERT_LE(g.h[i], std::max(c[i], g.q[i]) + 1e-15);
    }
  }
}

TEST(FusionProperty, InvalidPreviousStateActsAsZeroVector) {
  fixture::Rng rng(32);
  const int f = 4;
  const FusionWeights w = FusionWeights::random(f, 99);
  HiddenState c(5, 4, f);
  for (double& x : c.channels.values()) x = std::uniform_real_distribution<double>(-1, 1)(rng);
  c.valid.fill(1);
  HiddenState prev(5, 4, f);
  for (double& x : prev.channels.values()) x = 42.0;  // ignored: marked invalid
  const HiddenState a = fuse_state(c, prev, w);
  const HiddenState b = fuse_state(c, HiddenState(), w);
  EXPECT_TRUE(a.channels == b.channels);
  const std::vector<double> zero(f, 0.0);
  const GateValues g = fuse_pixel(c.channels.pixel(2, 1), zero, w);
  for (int i = 0; i < f; ++i) EXPECT_EQ(a.channels(2, 1, i), g.h[i]);
  for (auto x : a.valid.pixels()) EXPECT_EQ(x, 1);
}

TEST(Fusion, ExamplesAndErrors) {
  const FusionWeights zero = FusionWeights::zeros(3);
  const std::vector<double> c{0.2, -0.4, 1.0};
  const std::vector<double> h{0.7, 0.1, -0.3};
  const GateValues g = fuse_pixel(c, h, zero);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(g.h[i], 0.5 * c[i]);
  FusionWeights sat = zero;
  sat.b_z.assign(3, 50.0);
  const GateValues s = fuse_pixel(c, h, sat);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.h[i], c[i], 1e-9);

  HiddenState c4(2, 2, 4);
  c4.valid.fill(1);
  EXPECT_THROW(fuse_state(c4, HiddenState(), zero), ConfigError);
  FusionWeights broken = zero;
  broken.w_q.pop_back();
  EXPECT_THROW(broken.validate(), ConfigError);
}

TEST(FusionProperty, DeterministicAcrossCalls) {
  const FusionWeights w = FusionWeights::random(6, 5);
  EXPECT_TRUE(w == FusionWeights::random(6, 5));
  EXPECT_FALSE(w == FusionWeights::random(6, 6));
  fixture::Rng rng(33);
  HiddenState c(9, 7, 6);
  for (double& x : c.channels.values()) x = std::uniform_real_distribution<double>(-1, 1)(rng);
  c.valid.fill(1);
  HiddenState prev = c;
  prev.valid = fixture::random_mask(9, 7, 0.5, rng);
  EXPECT_TRUE(fuse_state(c, prev, w).channels == fuse_state(c, prev, w).channels);
}
