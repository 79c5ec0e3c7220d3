#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>

#include "tstereo/image.hpp"

namespace tstereo {

/// Rectified pinhole stereo rig. Disparity runs along u only.
struct CameraModel {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double baseline = 0.0;  ///< meters
  int width = 0;
  int height = 0;

  /// Throws ConfigError unless fx, fy, baseline > 0 and width, height >= 1.
  void validate() const;

  friend bool operator==(const CameraModel&, const CameraModel&) = default;
};

/// Rigid camera-to-world transform.
class Pose {
 public:
  Pose() = default;
  /// Throws ConfigError when rotation is not a proper rotation within 1e-9.
  Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static Pose identity() { return {}; }
  static Pose from_translation(const Eigen::Vector3d& t) { return {Eigen::Matrix3d::Identity(), t}; }
  /// Quaternion in (x, y, z, w) order; normalized before conversion.
  static Pose from_quaternion(const Eigen::Vector3d& t, double qx, double qy, double qz, double qw);

  const Eigen::Matrix3d& rotation() const noexcept { return rotation_; }
  const Eigen::Vector3d& translation() const noexcept { return translation_; }
  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation_); }

  Eigen::Vector3d apply(const Eigen::Vector3d& point) const { return rotation_ * point + translation_; }
  Pose inverse() const;
  /// (a * b).apply(x) == a.apply(b.apply(x))
  friend Pose operator*(const Pose& a, const Pose& b);

  /// Max deviation of R^T R from identity and of det(R) from 1.
  double orthonormality_error() const;

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

/// Transform taking points in the previous camera frame to the current one:
/// inverse(current) * previous.
Pose relative_pose(const Pose& previous_world, const Pose& current_world);

/// z = b * fx / d. Throws DomainError when d <= 0.
double depth_from_disparity(double disparity, const CameraModel& cam);
/// d = b * fx / z. Throws DomainError when z <= 0.
double disparity_from_depth(double depth, const CameraModel& cam);

/// Pixel plus depth to a camera-frame point. Throws DomainError when z <= 0.
Eigen::Vector3d backproject(double u, double v, double depth, const CameraModel& cam);

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
};

/// Camera-frame point to pixel. Throws DomainError when the point is behind
/// the camera (Z <= 0).
Projection pinhole_project(const Eigen::Vector3d& point, const CameraModel& cam);

struct WarpedSample {
  double u = 0.0;  ///< continuous target column, before rounding
  double v = 0.0;
  double disparity = 0.0;
};

/// Continuous target location and disparity of one source sample moved by
/// `relative`. Empty when the sample lands behind the camera.
std::optional<WarpedSample> warp_sample(double u, double v, double disparity, const Pose& relative,
                                      const CameraModel& cam);

struct WarpResult {
  SemiDenseDisparity disparity;
  HiddenState hidden;
};

/// Forward-warps a dense disparity map and its hidden state into the viewpoint
/// reached by `relative`. Targets are rounded to the nearest pixel; collisions
/// keep the largest warped disparity. Source pixels with d <= 0 or non-finite d
/// are skipped. `prev_hidden` may have zero channels.
WarpResult forward_warp(const DisparityMap& prev_disp, const HiddenState& prev_hidden,
                        const Pose& relative, const CameraModel& cam);

}  // namespace tstereo
