#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tstereo/frame.hpp"
#include "tstereo/geometry.hpp"
#include "tstereo/image.hpp"

namespace tstereo {

enum class TextureKind { noise, checker };

/// Procedural texture over plane-local metric coordinates.
struct Texture {
  TextureKind kind = TextureKind::noise;
  std::uint64_t seed = 0;
  double scale = 0.05;  ///< meters per texture cell
};

/// Rectangular extent in the plane's local (s, t) axes.
struct PlaneBounds {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double half_s = 1.0;
  double half_t = 1.0;
};

/// World-frame plane n . X = offset (n normalized on use).
struct ScenePlane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 1.0;
  Texture texture;
  std::optional<PlaneBounds> bounds;
};

struct SceneSpec {
  CameraModel camera;
  std::vector<ScenePlane> planes;
  std::vector<Pose> trajectory;  ///< one camera-to-world pose per frame
  int max_disparity = 64;        ///< every GT disparity must stay below this
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;      ///< additive Gaussian intensity noise

  int frame_count() const noexcept { return static_cast<int>(trajectory.size()); }
};

struct SyntheticFrame {
  Frame frame;
  DisparityMap gt_disparity;
  /// Flow to the next frame; empty maps on the last frame.
  Image<double> flow_u;
  Image<double> flow_v;
  Mask flow_valid;
  Mask stereo_occlusion;    ///< not visible from the right camera
  Mask temporal_occlusion;  ///< hidden behind another surface in the next frame
  Mask occlusion;           ///< union of the two
  bool has_next = false;
};

/// Plane-local orthonormal axes (s, t) derived deterministically from n.
std::pair<Eigen::Vector3d, Eigen::Vector3d> plane_axes(const Eigen::Vector3d& normal);

double evaluate_texture(const Texture& texture, double s, double t);

struct RayHit {
  double depth = 0.0;  ///< camera-frame z of the hit
  int plane = -1;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();  ///< world coordinates
};

/// Nearest plane hit along the ray through continuous pixel (u, v).
std::optional<RayHit> cast_ray(const SceneSpec& spec, const Pose& camera_to_world, double u, double v);

/// Intensity seen through continuous pixel (u, v); throws ConfigError when
/// no plane covers the ray.
double render_intensity(const SceneSpec& spec, const Pose& camera_to_world, double u, double v);

/// Pose of the right camera of the rig.
Pose right_camera_pose(const SceneSpec& spec, const Pose& left_pose);

/// Throws ConfigError when the spec is malformed.
void validate_scene(const SceneSpec& spec);

/// Renders one frame with exact GT disparity, flow and occlusion. Throws
/// ConfigError for uncovered pixels or disparities >= max_disparity.
SyntheticFrame generate_frame(const SceneSpec& spec, int index);

std::vector<SyntheticFrame> generate_scene(const SceneSpec& spec);

struct StandardSceneOptions {
  int frames = 8;
  double forward_step = 0.10;  ///< m per frame along +z
  double lateral_step = 0.05;  ///< m per frame along +x
  double yaw_step_deg = 0.3;
  bool single_plane = false;   ///< only the slanted back wall
  double noise_sigma = 0.0;
  std::uint64_t seed = 7;
};

/// 192x128, D=64 fixture: floor, slanted back wall and a free-standing panel.
SceneSpec standard_scene(const StandardSceneOptions& options = {});

}  // namespace tstereo
