#include "tstereo/synthetic.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "tstereo/error.hpp"
#include "tstereo/parallel.hpp"

namespace tstereo {

namespace {

constexpr double kOcclusionTolerance = 1e-4;  // m

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double lattice(std::int64_t x, std::int64_t y, std::uint64_t seed) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(x) * 0x632BE59BD9B4E019ull ^
                                                       static_cast<std::uint64_t>(y) * 0x8CB92BA72F3D8DD7ull));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double value_noise(double x, double y, std::uint64_t seed) {
  const double xf = std::floor(x);
  const double yf = std::floor(y);
  const auto x0 = static_cast<std::int64_t>(xf);
  const auto y0 = static_cast<std::int64_t>(yf);
  const double sx = fade(x - xf);
  const double sy = fade(y - yf);
  const double a = lattice(x0, y0, seed);
  const double b = lattice(x0 + 1, y0, seed);
  const double c = lattice(x0, y0 + 1, seed);
  const double d = lattice(x0 + 1, y0 + 1, seed);
  return (1.0 - sy) * ((1.0 - sx) * a + sx * b) + sy * ((1.0 - sx) * c + sx * d);
}

Eigen::Vector3d unit_normal(const ScenePlane& plane) { return plane.normal.normalized(); }

}  // namespace

std::pair<Eigen::Vector3d, Eigen::Vector3d> plane_axes(const Eigen::Vector3d& normal) {
  const Eigen::Vector3d n = normal.normalized();
  const Eigen::Vector3d helper = std::abs(n.y()) < 0.9 ? Eigen::Vector3d::UnitY() : Eigen::Vector3d::UnitX();
  const Eigen::Vector3d s = helper.cross(n).normalized();
  return {s, n.cross(s)};
}

double evaluate_texture(const Texture& texture, double s, double t) {
  const double x = s / texture.scale;
  const double y = t / texture.scale;
  if (texture.kind == TextureKind::checker) {
    const auto parity = static_cast<std::int64_t>(std::floor(x)) + static_cast<std::int64_t>(std::floor(y));
    return (parity & 1) != 0 ? 0.8 : 0.2;
  }
  return 0.6 * value_noise(x, y, texture.seed) + 0.4 * value_noise(2.0 * x + 17.3, 2.0 * y - 5.1, texture.seed + 1);
}

std::optional<RayHit> cast_ray(const SceneSpec& spec, const Pose& camera_to_world, double u, double v) {
  const CameraModel& cam = spec.camera;
  const Eigen::Vector3d dir_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
  const Eigen::Vector3d dir = camera_to_world.rotation() * dir_cam;
  const Eigen::Vector3d origin = camera_to_world.translation();

  std::optional<RayHit> best;
  for (int i = 0; i < static_cast<int>(spec.planes.size()); ++i) {
    const ScenePlane& plane = spec.planes[i];
    const Eigen::Vector3d n = unit_normal(plane);
    const double offset = plane.offset / plane.normal.norm();
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double lambda = (offset - n.dot(origin)) / denom;  // equals camera-frame depth
    if (!(lambda > 0.0)) continue;
    if (best && lambda >= best->depth) continue;
    const Eigen::Vector3d point = origin + lambda * dir;
    if (plane.bounds) {
      const auto [axis_s, axis_t] = plane_axes(plane.normal);
      const Eigen::Vector3d rel = point - plane.bounds->center;
      if (std::abs(rel.dot(axis_s)) > plane.bounds->half_s || std::abs(rel.dot(axis_t)) > plane.bounds->half_t)
        continue;
    }
    best = RayHit{lambda, i, point};
  }
  return best;
}

double render_intensity(const SceneSpec& spec, const Pose& camera_to_world, double u, double v) {
  const auto hit = cast_ray(spec, camera_to_world, u, v);
  if (!hit) throw ConfigError("synthetic scene: pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                              ") is not covered by any plane");
  const ScenePlane& plane = spec.planes[hit->plane];
  const auto [axis_s, axis_t] = plane_axes(plane.normal);
  return evaluate_texture(plane.texture, hit->point.dot(axis_s), hit->point.dot(axis_t));
}

Pose right_camera_pose(const SceneSpec& spec, const Pose& left_pose) {
  return left_pose * Pose::from_translation({spec.camera.baseline, 0.0, 0.0});
}

void validate_scene(const SceneSpec& spec) {
  spec.camera.validate();
  if (spec.planes.empty()) throw ConfigError("synthetic scene: no planes");
  if (spec.trajectory.empty()) throw ConfigError("synthetic scene: empty trajectory");
  if (spec.max_disparity < 1) throw ConfigError("synthetic scene: max_disparity must be >= 1");
  if (!(spec.noise_sigma >= 0.0)) throw ConfigError("synthetic scene: noise_sigma must be >= 0");
  for (const auto& p : spec.planes) {
    if (!(p.normal.norm() > 0.0)) throw ConfigError("synthetic scene: plane normal must be non-zero");
    if (!(p.texture.scale > 0.0)) throw ConfigError("synthetic scene: texture scale must be positive");
  }
}

SyntheticFrame generate_frame(const SceneSpec& spec, int index) {
  validate_scene(spec);
  if (index < 0 || index >= spec.frame_count()) throw ConfigError("synthetic scene: frame index out of range");
  const CameraModel& cam = spec.camera;
  const int w = cam.width;
  const int h = cam.height;
  const Pose& pose = spec.trajectory[index];
  const Pose right_pose = right_camera_pose(spec, pose);
  const Pose world_to_right = right_pose.inverse();
  const bool has_next = index + 1 < spec.frame_count();
  const Pose world_to_next = has_next ? spec.trajectory[index + 1].inverse() : Pose::identity();
  const double min_depth = cam.baseline * cam.fx / spec.max_disparity;

  SyntheticFrame out;
  out.frame.index = index;
  out.frame.timestamp = 0.1 * index;
  out.frame.pose = pose;
  out.frame.camera = cam;
  out.frame.left = GrayImage(w, h);
  out.frame.right = GrayImage(w, h);
  out.gt_disparity = DisparityMap(w, h);
  out.stereo_occlusion = Mask(w, h, 0);
  out.temporal_occlusion = Mask(w, h, 0);
  out.has_next = has_next;
  if (has_next) {
    out.flow_u = Image<double>(w, h, 0.0);
    out.flow_v = Image<double>(w, h, 0.0);
    out.flow_valid = Mask(w, h, 0);
  }

  // Validate coverage and depth range up front; the parallel loop below must not throw.
  for (const Pose* p : {&pose, &right_pose})
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        const auto hit = cast_ray(spec, *p, u, v);
        if (!hit) throw ConfigError("synthetic scene: pixel (" + std::to_string(u) + ", " + std::to_string(v) +
                                    ") of frame " + std::to_string(index) + " is not covered by any plane");
        if (p == &pose && !(hit->depth > min_depth))
          throw ConfigError("synthetic scene: depth at (" + std::to_string(u) + ", " + std::to_string(v) +
                            ") gives disparity >= max_disparity");
      }

  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      const RayHit hit = *cast_ray(spec, pose, u, v);
      const ScenePlane& plane = spec.planes[hit.plane];
      const auto [axis_s, axis_t] = plane_axes(plane.normal);
      out.frame.left(u, v) = evaluate_texture(plane.texture, hit.point.dot(axis_s), hit.point.dot(axis_t));
      out.frame.right(u, v) = render_intensity(spec, right_pose, u, v);
      out.gt_disparity(u, v) = cam.baseline * cam.fx / hit.depth;

      // Visibility from the right camera.
      const Eigen::Vector3d in_right = world_to_right.apply(hit.point);
      bool stereo_occluded = true;
      if (in_right.z() > 0.0) {
        const Projection pr = pinhole_project(in_right, cam);
        if (pr.u >= 0.0 && pr.u <= w - 1.0) {
          const auto seen = cast_ray(spec, right_pose, pr.u, pr.v);
          stereo_occluded = seen && seen->depth < pr.z - kOcclusionTolerance;
        }
      }
      out.stereo_occlusion(u, v) = stereo_occluded ? 1 : 0;

      if (!has_next) continue;
      const Eigen::Vector3d in_next = world_to_next.apply(hit.point);
      if (!(in_next.z() > 0.0)) {
        out.flow_u(u, v) = std::numeric_limits<double>::quiet_NaN();
        out.flow_v(u, v) = std::numeric_limits<double>::quiet_NaN();
        out.temporal_occlusion(u, v) = 1;
        continue;
      }
      const Projection pn = pinhole_project(in_next, cam);
      out.flow_u(u, v) = pn.u - u;
      out.flow_v(u, v) = pn.v - v;
      out.flow_valid(u, v) = 1;
      const auto seen = cast_ray(spec, spec.trajectory[index + 1], pn.u, pn.v);
      if (seen && seen->depth < pn.z - kOcclusionTolerance) out.temporal_occlusion(u, v) = 1;
    }
  });

  out.occlusion = Mask(w, h, 0);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      out.occlusion(u, v) = (out.stereo_occlusion(u, v) || out.temporal_occlusion(u, v)) ? 1 : 0;

  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(splitmix64(spec.seed ^ static_cast<std::uint64_t>(index)));
    std::normal_distribution<double> normal(0.0, spec.noise_sigma);
    for (GrayImage* img : {&out.frame.left, &out.frame.right})
      for (double& x : img->pixels()) x = std::clamp(x + normal(rng), 0.0, 1.0);
  }
  return out;
}

std::vector<SyntheticFrame> generate_scene(const SceneSpec& spec) {
  validate_scene(spec);
  std::vector<SyntheticFrame> frames;
  frames.reserve(spec.trajectory.size());
  for (int i = 0; i < spec.frame_count(); ++i) frames.push_back(generate_frame(spec, i));
  return frames;
}

SceneSpec standard_scene(const StandardSceneOptions& options) {
  SceneSpec spec;
  spec.camera = CameraModel{160.0, 160.0, 95.5, 63.5, 0.15, 192, 128};
  spec.max_disparity = 64;
  spec.seed = options.seed;
  spec.noise_sigma = options.noise_sigma;

  const Eigen::Vector3d wall_normal = Eigen::Vector3d(-0.25, 0.0, 1.0).normalized();
  ScenePlane back_wall{wall_normal, wall_normal.dot(Eigen::Vector3d(0.0, 0.0, 8.0)),
                       Texture{TextureKind::noise, options.seed * 31 + 1, 0.08}, std::nullopt};
  if (options.single_plane) {
    spec.planes = {back_wall};
  } else {
    ScenePlane floor{Eigen::Vector3d::UnitY(), 1.0, Texture{TextureKind::noise, options.seed * 31 + 2, 0.05},
                     std::nullopt};
    const Eigen::Vector3d panel_normal = Eigen::Vector3d(0.3, 0.0, 1.0).normalized();
    const Eigen::Vector3d panel_center(-0.7, 0.0, 4.0);
    ScenePlane panel{panel_normal, panel_normal.dot(panel_center),
                     Texture{TextureKind::noise, options.seed * 31 + 3, 0.04},
                     PlaneBounds{panel_center, 0.7, 0.8}};
    spec.planes = {floor, back_wall, panel};
  }

  const double yaw_step = options.yaw_step_deg * std::numbers::pi / 180.0;
  for (int i = 0; i < options.frames; ++i) {
    const Eigen::Matrix3d yaw = Eigen::AngleAxisd(yaw_step * i, Eigen::Vector3d::UnitY()).toRotationMatrix();
    spec.trajectory.emplace_back(yaw, Eigen::Vector3d(options.lateral_step * i, 0.0, options.forward_step * i));
  }
  return spec;
}

}  // namespace tstereo
