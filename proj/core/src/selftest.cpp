#include "tstereo/selftest.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <random>
#include <sstream>

#include "tstereo/completion.hpp"
#include "tstereo/cost_volume.hpp"
#include "tstereo/error.hpp"
#include "tstereo/features.hpp"
#include "tstereo/fusion.hpp"
#include "tstereo/geometry.hpp"
#include "tstereo/io.hpp"
#include "tstereo/losses_metrics.hpp"
#include "tstereo/pipeline.hpp"
#include "tstereo/refinement.hpp"
#include "tstereo/synthetic.hpp"

namespace tstereo {

void CheckRecorder::check(const std::string& name, bool passed, const std::string& detail) {
  checks_.push_back({name, passed, detail});
}

void CheckRecorder::near(const std::string& name, double actual, double expected, double tolerance) {
  const bool ok = std::abs(actual - expected) <= tolerance;
  std::ostringstream detail;
  if (!ok) detail << "got " << actual << ", expected " << expected << " (tol " << tolerance << ")";
  check(name, ok, detail.str());
}

void CheckRecorder::run(const std::string& name, const std::function<bool()>& body) {
  try {
    check(name, body());
  } catch (const std::exception& e) {
    check(name, false, std::string("exception: ") + e.what());
  }
}

std::size_t CheckRecorder::failures() const {
  return static_cast<std::size_t>(
      std::count_if(checks_.begin(), checks_.end(), [](const SelftestCheck& c) { return !c.passed; }));
}

namespace {

CameraModel cam_100() { return CameraModel{100.0, 100.0, 31.5, 23.5, 0.5, 64, 48}; }

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

double hashed_noise(int u, int v) {
  std::uint64_t x = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) ^ static_cast<std::uint32_t>(v);
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  x ^= x >> 31;
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

std::vector<double> column_with(int depth, double fill, std::initializer_list<std::pair<int, double>> peaks) {
  std::vector<double> c(depth, fill);
  for (const auto& [d, value] : peaks) c[d] = value;
  return c;
}

CostVolume volume_from_column(const std::vector<double>& column) {
  CostVolume vol(1, 1, static_cast<int>(column.size()));
  std::copy(column.begin(), column.end(), vol.column(0, 0).begin());
  return vol;
}

// Small textured scene used by the pipeline checks.
SceneSpec small_scene(int frames) {
  SceneSpec spec;
  spec.camera = CameraModel{60.0, 60.0, 31.5, 23.5, 0.1, 64, 48};
  spec.max_disparity = 16;
  const Eigen::Vector3d n = Eigen::Vector3d(-0.2, 0.1, 1.0).normalized();
  spec.planes.push_back({n, n.dot(Eigen::Vector3d(0, 0, 1.2)), Texture{TextureKind::noise, 3, 0.02}, std::nullopt});
  for (int i = 0; i < frames; ++i) spec.trajectory.push_back(Pose::from_translation({0.01 * i, 0.0, 0.02 * i}));
  return spec;
}

PipelineConfig small_pipeline(PipelineMode mode) {
  PipelineConfig cfg;
  cfg.mode = mode;
  cfg.max_disparity = 16;
  cfg.completion.disparity_scale = 16;
  cfg.refinement.disparity_scale = 16;
  cfg.completion.state_channels = 8;
  cfg.refinement.iterations = 3;
  return cfg;
}

class CollectSink : public FrameSink {
 public:
  void consume(const Frame&, const FrameResult& result) override { outputs.push_back(result.disparity); }
  std::vector<DisparityMap> outputs;
};

class SpecSource : public FrameSource {
 public:
  explicit SpecSource(SceneSpec spec) : spec_(std::move(spec)) {}
  std::optional<Frame> next() override {
    if (i_ >= spec_.frame_count()) return std::nullopt;
    return generate_frame(spec_, i_++).frame;
  }

 private:
  SceneSpec spec_;
  int i_ = 0;
};

void geometry_checks(CheckRecorder& rec) {
  const CameraModel cam = cam_100();
  rec.near("geometry: z = b*fx/d for d=5", depth_from_disparity(5.0, cam), 10.0);
  rec.run("geometry: depth/disparity round trip", [&] {
    for (double z : {0.3, 1.0, 7.5, 42.0, 1e3}) {
      const double back = depth_from_disparity(disparity_from_depth(z, cam), cam);
      if (std::abs(back - z) > 1e-9 * z) return false;
    }
    return true;
  });
  rec.expect_throw<DomainError>("geometry: d=0 is a domain error", [&] { depth_from_disparity(0.0, cam); });
  rec.run("geometry: principal ray backprojects to (0,0,z)", [&] {
    return (backproject(cam.cx, cam.cy, 7.0, cam) - Eigen::Vector3d(0, 0, 7)).norm() < 1e-12;
  });
  rec.run("geometry: unit-slope ray", [&] {
    return (backproject(cam.cx + cam.fx, cam.cy, 1.0, cam) - Eigen::Vector3d(1, 0, 1)).norm() < 1e-12;
  });
  rec.run("geometry: project/backproject round trip", [&] {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> pu(0, cam.width - 1), pv(0, cam.height - 1), pz(0.5, 50);
    for (int i = 0; i < 100; ++i) {
      const double u = pu(rng), v = pv(rng);
      const Projection p = pinhole_project(backproject(u, v, pz(rng), cam), cam);
      if (std::abs(p.u - u) > 1e-9 || std::abs(p.v - v) > 1e-9) return false;
    }
    return true;
  });
  rec.run("geometry: optical axis projects to principal point", [&] {
    const Projection p = pinhole_project({0, 0, 5}, cam);
    return p.u == cam.cx && p.v == cam.cy && p.z == 5.0;
  });
  rec.run("geometry: (1,0,1) projects to cx+fx", [&] {
    const Projection p = pinhole_project({1, 0, 1}, cam);
    return std::abs(p.u - (cam.cx + 100.0)) < 1e-12 && p.v == cam.cy && p.z == 1.0;
  });
  rec.expect_throw<DomainError>("geometry: point behind camera", [&] { pinhole_project({0, 0, -1}, cam); });

  rec.run("geometry: identity warp reproduces the map", [&] {
    DisparityMap d(cam.width, cam.height);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> dist(0.5, 30.0);
    for (double& x : d.pixels()) x = dist(rng);
    const WarpResult r = forward_warp(d, HiddenState{}, Pose::identity(), cam);
    if (r.disparity.valid_count() != d.size()) return false;
    for (std::size_t i = 0; i < d.size(); ++i)
      if (std::abs(r.disparity.values.pixels()[i] - d.pixels()[i]) > 1e-9) return false;
    return true;
  });
  rec.run("geometry: forward motion of 1 m scales disparity to 5.5556", [&] {
    const DisparityMap d(cam.width, cam.height, 5.0);
    const Pose moved = Pose::from_translation({0, 0, 1});
    const WarpResult r = forward_warp(d, HiddenState{}, relative_pose(Pose::identity(), moved), cam);
    if (r.disparity.valid_count() == 0) return false;
    for (int v = 0; v < cam.height; ++v)
      for (int u = 0; u < cam.width; ++u)
        if (r.disparity.valid(u, v) && std::abs(r.disparity.values(u, v) - 100.0 * 0.5 / 9.0) > 1e-9) return false;
    return true;
  });
  rec.run("geometry: lateral motion shifts u by -f*tx/z", [&] {
    const Pose moved = Pose::from_translation({0.1, 0, 0});
    const Pose rel = relative_pose(Pose::identity(), moved);
    for (double u : {10.0, 20.25, 40.0}) {
      const auto s = warp_sample(u, 12.0, 5.0, rel, cam);
      if (!s || std::abs(s->u - (u - 1.0)) > 1e-9 || std::abs(s->disparity - 5.0) > 1e-9 ||
          std::abs(s->v - 12.0) > 1e-9)
        return false;
    }
    return true;
  });
}

void feature_and_volume_checks(CheckRecorder& rec) {
  rec.run("features: constant image gives zero census and unit cosine", [] {
    const FeatureMap f = extract_features(GrayImage(9, 7, 0.4), DescriptorKind::census, 1);
    for (int v = 0; v < 7; ++v)
      for (int u = 0; u < 9; ++u) {
        const auto d = f.channels.pixel(u, v);
        for (int k = 0; k < 9; ++k)
          if (d[k] != 0.0) return false;
        if (d[9] != 1.0) return false;
        if (std::abs(cosine(d, f.channels.pixel(0, 0)) - 1.0) > 1e-12) return false;
      }
    return true;
  });
  rec.run("features: census sign pattern on a ramp", [] {
    GrayImage ramp(9, 7);
    for (int v = 0; v < 7; ++v)
      for (int u = 0; u < 9; ++u) ramp(u, v) = u / 8.0;
    const FeatureMap f = extract_features(ramp, DescriptorKind::census, 1);
    for (int v = 1; v < 6; ++v)
      for (int u = 1; u < 8; ++u) {
        const auto d = f.channels.pixel(u, v);
        if (d[3] != -1.0 || d[5] != 1.0) return false;  // window row 0 offset -1, +1
      }
    return true;
  });
  // Census windows around local extrema share one sign pattern, so only the
  // zero-mean patch descriptor gives a strictly unique optimum on noise.
  const auto shifted_pair = [](DescriptorKind kind, bool strict) {
    const int w = 40, h = 12, shift = 3, r = 2;
    GrayImage left(w, h), right(w, h);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        left(u, v) = hashed_noise(u, v);
        right(u, v) = hashed_noise(u + shift, v);
      }
    const CostVolume vol = build_cost_volume(extract_features(left, kind, r), extract_features(right, kind, r), 8);
    for (int v = r; v < h - r; ++v)
      for (int u = shift + r; u < w - r; ++u) {
        if (std::abs(vol.at(u, v, shift) - 1.0) > 1e-12) return false;
        for (int d = 0; d < 8; ++d) {
          if (d == shift) continue;
          if (strict ? vol.at(u, v, d) >= vol.at(u, v, shift) : vol.at(u, v, d) > vol.at(u, v, shift)) return false;
        }
      }
    return true;
  };
  rec.run("features: exact shift gives similarity 1 at d=3 (census, maximal)",
          [&] { return shifted_pair(DescriptorKind::census, false); });
  rec.run("features: exact shift gives a unique maximum at d=3 (zncc)",
          [&] { return shifted_pair(DescriptorKind::zncc_patch, true); });

  rec.run("cost volume: identical features give C(d=0) = 1", [] {
    GrayImage img(16, 8);
    for (int v = 0; v < 8; ++v)
      for (int u = 0; u < 16; ++u) img(u, v) = hashed_noise(u, v);
    const FeatureMap f = extract_features(img, DescriptorKind::zncc_patch, 1);
    const CostVolume vol = build_cost_volume(f, f, 4);
    for (int v = 0; v < 8; ++v)
      for (int u = 0; u < 16; ++u)
        if (std::abs(vol.at(u, v, 0) - 1.0) > 1e-12) return false;
    return true;
  });
  rec.run("cost volume: orthogonal features give 0", [] {
    FeatureMap l{Tensor3<double>(3, 1, 2, 0.0), DescriptorKind::census, 1};
    FeatureMap r = l;
    for (int u = 0; u < 3; ++u) {
      l.channels(u, 0, 0) = 1.0;
      r.channels(u, 0, 1) = 1.0;
    }
    const CostVolume vol = build_cost_volume(l, r, 1);
    for (int u = 0; u < 3; ++u)
      if (vol.at(u, 0, 0) != 0.0) return false;
    return true;
  });
  rec.run("cost volume: u-d<0 holds the -1 sentinel", [] {
    GrayImage img(12, 5, 0.5);
    const FeatureMap f = extract_features(img, DescriptorKind::census, 1);
    const CostVolume vol = build_cost_volume(f, f, 8);
    for (int v = 0; v < 5; ++v)
      for (int u = 0; u < 12; ++u)
        for (int d = u + 1; d < 8; ++d)
          if (vol.at(u, v, d) != -1.0) return false;
    return true;
  });
  rec.run("wta: clear margin keeps d=7", [] {
    const auto c = column_with(16, 0.2, {{7, 0.9}});
    const auto r = wta_column(c, 0.3);
    const SemiDenseDisparity s = wta_semidense(volume_from_column(c), 0.3);
    return r.valid && r.best == 7 && s.valid(0, 0) == 1 && s.values(0, 0) == 7.0;
  });
  rec.run("wta: ambiguous match is rejected", [] {
    const auto c = column_with(16, 0.2, {{7, 0.9}, {9, 0.8}});
    const SemiDenseDisparity s = wta_semidense(volume_from_column(c), 0.3);
    return !wta_column(c, 0.3).valid && s.valid(0, 0) == 0 && s.values(0, 0) == 0.0;
  });
  rec.run("wta: immediate neighbors are excluded from d2", [] {
    const auto c = column_with(16, 0.2, {{7, 0.9}, {8, 0.85}, {3, 0.5}});
    const auto r = wta_column(c, 0.3);
    return r.valid && r.best == 7 && r.runner_up == 3;
  });
  rec.run("lookup: integer disparity with r=0 samples exactly", [] {
    const auto c = column_with(8, 0.1, {{2, 0.8}, {3, 0.6}, {5, 0.3}});
    const CostVolume vol = volume_from_column(c);
    for (int d = 0; d < 8; ++d)
      if (lookup(vol, DisparityMap(1, 1, d), 0)(0, 0, 0) != c[d]) return false;
    return true;
  });
  rec.run("lookup: d=2.5 interpolates to 0.7", [] {
    const CostVolume vol = volume_from_column(column_with(8, 0.1, {{2, 0.8}, {3, 0.6}}));
    return std::abs(lookup(vol, DisparityMap(1, 1, 2.5), 0)(0, 0, 0) - 0.7) <= 1e-12;
  });
  rec.run("lookup: disparity beyond D-1 clamps", [] {
    const CostVolume vol = volume_from_column(column_with(8, 0.1, {{7, 0.55}}));
    return lookup(vol, DisparityMap(1, 1, 11.3), 0)(0, 0, 0) == 0.55;
  });
}

void completion_fusion_checks(CheckRecorder& rec) {
  rec.run("completion: fully valid input is returned verbatim", [] {
    SemiDenseDisparity s{DisparityMap(11, 9), Mask(11, 9, 1)};
    for (int v = 0; v < 9; ++v)
      for (int u = 0; u < 11; ++u) s.values(u, v) = 0.37 * u + 1.1 * v + hashed_noise(u, v);
    const CompletionOutput out = complete(s, FeatureMap{});
    for (int v = 0; v < 9; ++v)
      for (int u = 0; u < 11; ++u)
        if (out.state.channels(u, v, 1) != 0.0) return false;
    return out.dense == s.values;
  });
  rec.run("completion: constant ring fills its hole with the constant", [] {
    SemiDenseDisparity s{DisparityMap(9, 9, 0.0), Mask(9, 9, 0)};
    for (int v = 0; v < 9; ++v)
      for (int u = 0; u < 9; ++u)
        if (u == 0 || v == 0 || u == 8 || v == 8) {
          s.values(u, v) = 4.0;
          s.valid(u, v) = 1;
        }
    const DisparityMap dense = complete(s, FeatureMap{}).dense;
    return std::all_of(dense.pixels().begin(), dense.pixels().end(),
                       [](double x) { return std::abs(x - 4.0) <= 1e-12; });
  });

  rec.run("fusion: zero weights halve the state", [] {
    const std::vector<double> c{0.3, -1.2, 2.0, 0.0}, h{5.0, -3.0, 0.1, 9.0};
    const GateValues g = fuse_pixel(c, h, FusionWeights::zeros(4));
    for (int i = 0; i < 4; ++i)
      if (g.z[i] != 0.5 || g.q[i] != 0.0 || std::abs(g.h[i] - 0.5 * c[i]) > 1e-15) return false;
    return true;
  });
  rec.run("fusion: saturated update gate passes c through", [] {
    FusionWeights w = FusionWeights::random(4, 3);
    std::fill(w.b_z.begin(), w.b_z.end(), 50.0);
    const std::vector<double> c{0.3, -1.2, 2.0, 0.0}, h{0.5, -0.3, 0.1, 0.9};
    const GateValues g = fuse_pixel(c, h, w);
    for (int i = 0; i < 4; ++i)
      if (std::abs(g.h[i] - c[i]) > 1e-9) return false;
    return true;
  });
  rec.run("fusion: output lies between c and q", [] {
    std::mt19937 rng(2);
    std::normal_distribution<double> n(0.0, 1.5);
    for (int trial = 0; trial < 50; ++trial) {
      const FusionWeights w = FusionWeights::random(6, trial, 0.8);
      std::vector<double> c(6), h(6);
      for (int i = 0; i < 6; ++i) {
        c[i] = n(rng);
        h[i] = n(rng);
      }
      const GateValues g = fuse_pixel(c, h, w);
      for (int i = 0; i < 6; ++i)
        if (g.h[i] < std::min(c[i], g.q[i]) || g.h[i] > std::max(c[i], g.q[i])) return false;
    }
    return true;
  });
}

void refinement_checks(CheckRecorder& rec) {
  rec.run("refinement: exact parabola peak at +1.4", [] {
    std::vector<double> slab(9);
    for (int k = 0; k < 9; ++k) slab[k] = 1.0 - 0.01 * (k - 4 - 1.4) * (k - 4 - 1.4);
    return std::abs(slab_step(slab, 2.0) - 1.4) <= 1e-6;
  });
  rec.run("refinement: flat slab gives no step", [] { return slab_step(std::vector<double>(9, 0.3), 2.0) == 0.0; });
  rec.run("refinement: boundary peak steps by r without a parabola", [] {
    const std::vector<double> slab{0.1, 0.2, 0.3, 0.4, 0.9};
    return slab_step(slab, 2.0) == 2.0;
  });
  rec.run("refinement: planar gradient recovered exactly", [] {
    DisparityMap d(10, 8);
    for (int v = 0; v < 8; ++v)
      for (int u = 0; u < 10; ++u) d(u, v) = 2.0 + 0.5 * u - 0.25 * v;
    const std::vector<OffsetPair> pairs{{{1, 0}, {0, 1}}};
    const auto s = sample_gradients(d, pairs);
    for (int v = 1; v < 7; ++v)
      for (int u = 1; u < 9; ++u)
        if (std::abs(s[0].field.du(u, v) - 0.5) > 1e-12 || std::abs(s[0].field.dv(u, v) + 0.25) > 1e-12)
          return false;
    return true;
  });
  rec.run("refinement: plane through three points", [] {
    const PlaneGradient g = plane_gradient({1, 1}, 1.0, {1, 0}, 0.5);
    return std::abs(g.du - 0.5) <= 1e-12 && std::abs(g.dv - 0.5) <= 1e-12;
  });
  rec.expect_throw<ConfigError>("refinement: collinear offsets rejected", [] {
    const std::vector<OffsetPair> pairs{{{1, 1}, {2, 2}}};
    sample_gradients(DisparityMap(5, 5, 1.0), pairs);
  });

  const auto planar_field = [](int w, int h, double du, double dv) {
    GradientField g{Image<double>(w, h, du), Image<double>(w, h, dv)};
    return g;
  };
  rec.run("refinement: identical samples survive gradient refinement", [&] {
    GrayImage img(12, 9);
    for (int v = 0; v < 9; ++v)
      for (int u = 0; u < 12; ++u) img(u, v) = hashed_noise(u, v);
    const FeatureMap ctx = extract_features(img, DescriptorKind::census, 1);
    std::vector<GradientSample> samples(3, GradientSample{planar_field(12, 9, 0.3, -0.7), Mask(12, 9, 1)});
    const GradientField g = refine_gradients(samples, ctx, 8.0);
    for (int v = 0; v < 9; ++v)
      for (int u = 0; u < 12; ++u)
        if (std::abs(g.du(u, v) - 0.3) > 1e-12 || std::abs(g.dv(u, v) + 0.7) > 1e-12) return false;
    return true;
  });
  rec.run("refinement: median rejects one outlier sample", [&] {
    const FeatureMap ctx = extract_features(GrayImage(12, 9, 0.5), DescriptorKind::census, 1);
    std::vector<GradientSample> samples(3, GradientSample{planar_field(12, 9, 0.3, -0.7), Mask(12, 9, 1)});
    samples[1].field = planar_field(12, 9, 5.0, 3.0);
    const GradientField g = refine_gradients(samples, ctx, 8.0);
    for (int v = 0; v < 9; ++v)
      for (int u = 0; u < 12; ++u)
        if (std::abs(g.du(u, v) - 0.3) > 1e-12 || std::abs(g.dv(u, v) + 0.7) > 1e-12) return false;
    return true;
  });
  rec.run("refinement: propagation arithmetic gives 5.75", [&] {
    const std::vector<PixelOffset> nb{{-2, -1}};
    const Tensor3<double> c = propagate(DisparityMap(5, 5, 5.0), planar_field(5, 5, 0.5, -0.25), nb);
    return std::abs(c(2, 2, 0) - 5.75) <= 1e-12;
  });
  rec.run("refinement: planes propagate themselves", [&] {
    DisparityMap d(9, 7);
    for (int v = 0; v < 7; ++v)
      for (int u = 0; u < 9; ++u) d(u, v) = 3.0 + 0.4 * u + 0.15 * v;
    const auto nb = square_neighborhood(1);
    const Tensor3<double> c = propagate(d, planar_field(9, 7, 0.4, 0.15), nb);
    for (int v = 1; v < 6; ++v)
      for (int u = 1; u < 8; ++u)
        for (int k = 0; k < static_cast<int>(nb.size()); ++k)
          if (std::abs(c(u, v, k) - d(u, v)) > 1e-12) return false;
    return true;
  });
  rec.run("refinement: zero gradients propagate raw neighbors", [&] {
    DisparityMap d(6, 5);
    for (int v = 0; v < 5; ++v)
      for (int u = 0; u < 6; ++u) d(u, v) = hashed_noise(u, v) * 10.0;
    const auto nb = square_neighborhood(1);
    const Tensor3<double> c = propagate(d, planar_field(6, 5, 0.0, 0.0), nb);
    for (int v = 1; v < 4; ++v)
      for (int u = 1; u < 5; ++u)
        for (int k = 0; k < static_cast<int>(nb.size()); ++k)
          if (c(u, v, k) != d(u + nb[k].du, v + nb[k].dv)) return false;
    return true;
  });

  const CostVolume vol = volume_from_column(column_with(10, 0.1, {{5, 0.2}, {6, 0.9}, {7, 0.3}}));
  rec.run("refinement: equal candidates fuse to themselves", [&] {
    Tensor3<double> c(1, 1, 3, 4.25);
    return weighted_fusion(c, vol, HiddenState{}, 10.0)(0, 0) == 4.25;
  });
  rec.run("refinement: beta=0 averages {5,6,7} to 6", [&] {
    Tensor3<double> c(1, 1, 3);
    c(0, 0, 0) = 5;
    c(0, 0, 1) = 6;
    c(0, 0, 2) = 7;
    return std::abs(weighted_fusion(c, vol, HiddenState{}, 0.0)(0, 0) - 6.0) <= 1e-12;
  });
  rec.run("refinement: large beta selects the best-cost candidate", [&] {
    Tensor3<double> c(1, 1, 3);
    c(0, 0, 0) = 5;
    c(0, 0, 1) = 6;
    c(0, 0, 2) = 7;
    return std::abs(weighted_fusion(c, vol, HiddenState{}, 1e4)(0, 0) - 6.0) <= 1e-6;
  });
  rec.run("refinement: N=0 leaves the inputs unchanged", [] {
    DisparityMap d(8, 6);
    for (int v = 0; v < 6; ++v)
      for (int u = 0; u < 8; ++u) d(u, v) = 1.0 + hashed_noise(u, v);
    HiddenState h(8, 6, 4);
    for (double& x : h.channels.values()) x = 0.25;
    h.valid.fill(1);
    RefinementConfig cfg;
    cfg.iterations = 0;
    const CostVolume cv(8, 6, 4, 0.0);
    const RefinementResult r = iterate(d, h, cv, FeatureMap{}, cfg, FusionWeights::zeros(4));
    return r.disparity == d && r.hidden.channels == h.channels && r.hidden.valid == h.valid && r.iterations.empty();
  });
}

void loss_checks(CheckRecorder& rec) {
  const auto c = column_with(8, 0.1, {{2, 0.8}, {3, 0.6}});
  rec.run("psi: integer d returns C(d)", [&] { return psi(c, 2.0) == 0.8; });
  rec.near("psi: midpoint 0.7", psi(c, 2.5), 0.7);
  rec.near("psi: d=2.25 gives 0.75", psi(c, 2.25), 0.75);
  rec.run("cost volume loss: perfect volume gives 0", [] {
    const auto col = column_with(16, 0.4, {{5, 1.0}});
    return std::abs(cost_volume_loss_pixel(col, 5.0, 0.5).value() - 0.0) <= 1e-12;
  });
  rec.run("cost volume loss: 0.4 + 0.4 = 0.8", [] {
    const auto col = column_with(16, 0.5, {{5, 0.6}});
    return std::abs(cost_volume_loss_pixel(col, 5.0, 0.5).value() - 0.8) <= 1e-12;
  });
  rec.run("disparity loss: plug-in example is 1.2", [] {
    const std::vector<double> dsr{0.5}, gdp{0.5};
    return std::abs(combine_disparity_loss(1.0, dsr, gdp, LossWeights{}) - 1.2) <= 1e-12;
  });
  rec.run("disparity loss: outputs equal to GT give 0", [] {
    DisparityMap gt(4, 3);
    for (int v = 0; v < 3; ++v)
      for (int u = 0; u < 4; ++u) gt(u, v) = 1.0 + u + 0.5 * v;
    const std::vector<DisparityMap> it{gt, gt};
    return disparity_loss(gt, it, it, gt, Mask(4, 3, 1), LossWeights{}) == 0.0;
  });
  rec.run("disparity loss: decay weights 0.9 then 1", [] {
    const std::vector<double> first{1.0, 0.0}, second{0.0, 1.0}, zero{0.0, 0.0};
    return std::abs(combine_disparity_loss(0.0, first, zero, LossWeights{}) - 0.9) <= 1e-12 &&
           std::abs(combine_disparity_loss(0.0, second, zero, LossWeights{}) - 1.0) <= 1e-12;
  });
  DisparityMap plane(6, 5);
  for (int v = 0; v < 5; ++v)
    for (int u = 0; u < 6; ++u) plane(u, v) = 4.0 + 0.5 * u - 0.25 * v;
  rec.run("gradient loss: exact gradients give 0", [&] {
    const GradientField g{Image<double>(6, 5, 0.5), Image<double>(6, 5, -0.25)};
    return std::abs(gradient_loss(g, plane, plane, Mask(6, 5, 1))) <= 1e-12;
  });
  rec.run("gradient loss: constant offset of 0.1", [&] {
    const GradientField g{Image<double>(6, 5, 0.6), Image<double>(6, 5, -0.25)};
    return std::abs(gradient_loss(g, plane, plane, Mask(6, 5, 1)) - 0.1) <= 1e-12;
  });
  rec.run("total loss: zeros", [] { return total_loss(0, 0, 0) == 0.0; });
  rec.near("total loss: 0.2 + 1.2 + 0.1", total_loss(0.2, 1.2, 0.1), 1.5);
  rec.run("total loss: addend order is irrelevant", [] {
    return total_loss(0.2, 1.2, 0.1) == total_loss(1.2, 0.1, 0.2) &&
           total_loss(0.2, 1.2, 0.1) == total_loss(0.1, 0.2, 1.2);
  });

  rec.run("metrics: d = gt gives zeros", [&] {
    const auto m = accuracy_metrics(plane, plane, Mask(6, 5, 1));
    return m && m->epe == 0.0 && m->bad1 == 0.0 && m->bad3 == 0.0 && m->d1 == 0.0;
  });
  rec.run("metrics: one 4 px error in four pixels", [] {
    DisparityMap gt(2, 2, 10.0), d = gt;
    d(1, 1) = 14.0;
    const auto m = accuracy_metrics(d, gt, Mask(2, 2, 1));
    return m && std::abs(m->epe - 1.0) <= 1e-12 && std::abs(m->bad3 - 25.0) <= 1e-12 &&
           std::abs(m->bad1 - 25.0) <= 1e-12;
  });
  rec.run("metrics: D1 needs more than 5% of GT", [] {
    DisparityMap gt(1, 1, 100.0), d4(1, 1, 104.0), d6(1, 1, 106.0);
    const auto m4 = accuracy_metrics(d4, gt, Mask(1, 1, 1));
    const auto m6 = accuracy_metrics(d6, gt, Mask(1, 1, 1));
    return m4 && m6 && m4->bad3 == 100.0 && m4->d1 == 0.0 && m6->bad3 == 100.0 && m6->d1 == 100.0;
  });

  const CameraModel cam{50.0, 50.0, 3.5, 2.5, 0.2, 8, 6};
  const TemporalAlignment still{Image<double>(8, 6, 0.0), Image<double>(8, 6, 0.0), Mask(8, 6, 1), Pose::identity(),
                                cam};
  rec.run("temporal: static identical frames give zeros", [&] {
    DisparityMap d(8, 6);
    for (int v = 0; v < 6; ++v)
      for (int u = 0; u < 8; ++u) d(u, v) = 2.0 + hashed_noise(u, v);
    const auto m = temporal_metrics(d, d, still, d, d, Mask(8, 6, 1));
    return m && m->abs_dd <= 1e-9 && m->relu_de <= 1e-9;
  });
  rec.run("temporal: shrinking errors give relu 0 and positive |dd|", [&] {
    const DisparityMap gt(8, 6, 3.0), d_t(8, 6, 4.0), d_t1(8, 6, 3.5);
    const auto m = temporal_metrics(d_t, d_t1, still, gt, gt, Mask(8, 6, 1));
    return m && m->relu_de == 0.0 && m->abs_dd > 0.0;
  });
}

void synthetic_checks(CheckRecorder& rec) {
  SceneSpec spec;
  spec.camera = CameraModel{100.0, 100.0, 15.5, 11.5, 0.5, 32, 24};
  spec.max_disparity = 16;
  spec.planes.push_back({Eigen::Vector3d::UnitZ(), 10.0, Texture{TextureKind::noise, 1, 0.05}, std::nullopt});
  spec.trajectory = {Pose::identity(), Pose::identity()};
  rec.run("synthetic: fronto-parallel plane at z=10 has disparity 5", [&] {
    const SyntheticFrame f = generate_frame(spec, 0);
    return std::all_of(f.gt_disparity.pixels().begin(), f.gt_disparity.pixels().end(),
                       [](double d) { return std::abs(d - 5.0) <= 1e-12; });
  });
  rec.run("synthetic: static camera has zero flow and no occlusion", [&] {
    const SyntheticFrame f = generate_frame(spec, 0);
    for (int v = 0; v < 24; ++v)
      for (int u = 0; u < 32; ++u)
        if (!f.flow_valid(u, v) || std::abs(f.flow_u(u, v)) > 1e-12 || std::abs(f.flow_v(u, v)) > 1e-12 ||
            f.temporal_occlusion(u, v))
          return false;
    return true;
  });
}

void pipeline_checks(CheckRecorder& rec) {
  const SceneSpec spec = small_scene(3);
  rec.run("pipeline: first frame equals single-frame mode", [&] {
    const Frame f = generate_frame(spec, 0).frame;
    const StereoPipeline temporal(small_pipeline(PipelineMode::temporal));
    const StereoPipeline single(small_pipeline(PipelineMode::single_frame));
    return temporal.process_frame(f, {}).disparity == single.process_frame(f, {}).disparity;
  });
  rec.run("pipeline: one-frame sequence writes one disparity", [&] {
    SpecSource source(small_scene(1));
    CollectSink sink;
    FrameSink* sinks[] = {&sink};
    const StereoPipeline p(small_pipeline(PipelineMode::temporal));
    const RunSummary s = run_sequence(source, p, sinks);
    return s.frames == 1 && sink.outputs.size() == 1;
  });
  rec.run("pipeline: reruns are bit-identical", [&] {
    std::vector<DisparityMap> runs[2];
    for (auto& out : runs) {
      SpecSource source(spec);
      CollectSink sink;
      FrameSink* sinks[] = {&sink};
      run_sequence(source, StereoPipeline(small_pipeline(PipelineMode::temporal)), sinks);
      out = std::move(sink.outputs);
    }
    return runs[0].size() == 3 && runs[0] == runs[1];
  });
}

void io_checks(CheckRecorder& rec, const std::filesystem::path& scratch) {
  rec.run("pfm: round trip is bit-identical", [&] {
    Image<double> map(13, 7);
    std::mt19937 rng(9);
    std::uniform_real_distribution<float> dist(-100.0f, 100.0f);
    for (double& x : map.pixels()) x = dist(rng);
    const auto path = scratch / "roundtrip.pfm";
    write_pfm(path, map);
    return read_pfm(path) == map;
  });
  rec.run("pfm: negative scale means little-endian", [&] {
    std::string bytes = "Pf\n2 1\n-1.0\n";
    for (float f : {1.5f, -2.25f}) {
      const auto bits = std::bit_cast<std::uint32_t>(f);
      for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
    const auto path = scratch / "little.pfm";
    write_file_atomic(path, bytes);
    const Image<double> m = read_pfm(path);
    return m.width() == 2 && m.height() == 1 && m(0, 0) == 1.5 && m(1, 0) == -2.25;
  });
  rec.expect_throw<ParseError>("pfm: color header is rejected", [&] {
    const auto path = scratch / "color.pfm";
    write_file_atomic(path, std::string("PF\n1 1\n-1.0\n") + std::string(12, '\0'));
    read_pfm(path);
  });
  const auto png = scratch / "disp.png";
  rec.run("png16: d=5 is stored as 1280", [&] {
    write_disp_png16(png, DisparityMap(3, 2, 5.0), Mask(3, 2, 1));
    const GrayImage raw = read_image(png);
    return std::lround(raw(0, 0) * 65535.0) == 1280 && read_disp_png16(png).values(2, 1) == 5.0;
  });
  rec.run("png16: invalid pixels are stored as 0 and read back invalid", [&] {
    Mask valid(3, 2, 1);
    valid(1, 0) = 0;
    write_disp_png16(png, DisparityMap(3, 2, 5.0), valid);
    const SemiDenseDisparity r = read_disp_png16(png);
    return std::lround(read_image(png)(1, 0) * 65535.0) == 0 && r.valid(1, 0) == 0 && r.valid_count() == 5;
  });
  rec.run("png16: d=0.001 rounds to invalid", [&] {
    write_disp_png16(png, DisparityMap(1, 1, 0.001), Mask(1, 1, 1));
    return read_disp_png16(png).valid(0, 0) == 0;
  });
  rec.run("poses: corrupt line is reported with its number", [&] {
    const auto path = scratch / "poses.txt";
    write_file_atomic(path, "0 0 0 0 0 0 0 1\n1 0 0 x 0 0 0 1\n");
    try {
      read_poses(path);
    } catch (const ParseError& e) {
      return e.location() == "line 2";
    }
    return false;
  });
}

}  // namespace

void run_library_selftest(CheckRecorder& rec, const std::filesystem::path& scratch) {
  geometry_checks(rec);
  feature_and_volume_checks(rec);
  completion_fusion_checks(rec);
  refinement_checks(rec);
  loss_checks(rec);
  synthetic_checks(rec);
  pipeline_checks(rec);
  io_checks(rec, scratch);
}

}  // namespace tstereo
