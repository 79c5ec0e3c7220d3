#include "tstereo/geometry.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tstereo/error.hpp"

namespace tstereo {

namespace {

constexpr double kRotationTolerance = 1e-9;

}  // namespace

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("camera: focal lengths must be positive");
  if (!(baseline > 0.0)) throw ConfigError("camera: baseline must be positive");
  if (width < 1 || height < 1) throw ConfigError("camera: image size must be at least 1x1");
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw ConfigError("camera: principal point must be finite");
}

Pose::Pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation_.allFinite() || !translation_.allFinite()) throw ConfigError("pose: non-finite entries");
  if (orthonormality_error() > kRotationTolerance)
    throw ConfigError("pose: rotation is not orthonormal with det +1");
}

Pose Pose::from_quaternion(const Eigen::Vector3d& t, double qx, double qy, double qz, double qw) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  if (!(q.norm() > 0.0) || !std::isfinite(q.norm())) throw ConfigError("pose: degenerate quaternion");
  q.normalize();
  return {q.toRotationMatrix(), t};
}

Pose Pose::inverse() const {
  Pose out;
  out.rotation_ = rotation_.transpose();
  out.translation_ = -(out.rotation_ * translation_);
  return out;
}

Pose operator*(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation_ = a.rotation_ * b.rotation_;
  out.translation_ = a.rotation_ * b.translation_ + a.translation_;
  return out;
}

double Pose::orthonormality_error() const {
  const double ortho = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(rotation_.determinant() - 1.0));
}

Pose relative_pose(const Pose& previous_world, const Pose& current_world) {
  return current_world.inverse() * previous_world;
}

double depth_from_disparity(double disparity, const CameraModel& cam) {
  if (!(disparity > 0.0)) throw DomainError("depth_from_disparity: disparity must be positive");
  return cam.baseline * cam.fx / disparity;
}

double disparity_from_depth(double depth, const CameraModel& cam) {
  if (!(depth > 0.0)) throw DomainError("disparity_from_depth: depth must be positive");
  return cam.baseline * cam.fx / depth;
}

Eigen::Vector3d backproject(double u, double v, double depth, const CameraModel& cam) {
  if (!(depth > 0.0)) throw DomainError("backproject: depth must be positive");
  return {(u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth};
}

Projection pinhole_project(const Eigen::Vector3d& point, const CameraModel& cam) {
  if (!(point.z() > 0.0)) throw DomainError("pinhole_project: point is behind the camera");
  return {cam.fx * point.x() / point.z() + cam.cx, cam.fy * point.y() / point.z() + cam.cy, point.z()};
}

std::optional<WarpedSample> warp_sample(double u, double v, double disparity, const Pose& relative,
                                      const CameraModel& cam) {
  const double z = cam.baseline * cam.fx / disparity;
  const Eigen::Vector3d moved = relative.apply(backproject(u, v, z, cam));
  if (!(moved.z() > 0.0)) return std::nullopt;
  const Projection p = pinhole_project(moved, cam);
  return WarpedSample{p.u, p.v, cam.baseline * cam.fx / moved.z()};
}

WarpResult forward_warp(const DisparityMap& prev_disp, const HiddenState& prev_hidden,
                        const Pose& relative, const CameraModel& cam) {
  const int w = prev_disp.width();
  const int h = prev_disp.height();
  const int features = prev_hidden.feature_count();
  if (features > 0 && (prev_hidden.width() != w || prev_hidden.height() != h))
    throw ConfigError("forward_warp: hidden state shape does not match disparity");

  WarpResult out;
  out.disparity.values = DisparityMap(w, h, 0.0);
  out.disparity.valid = Mask(w, h, 0);
  out.hidden = HiddenState(w, h, features);

  // Source index of the sample currently owning each target pixel.
  Image<int> owner(w, h, -1);
  // Sequential scan: ties on equal disparity keep the earliest source pixel.
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const double d = prev_disp(u, v);
      if (!std::isfinite(d) || d <= 0.0) continue;
      const auto target = warp_sample(u, v, d, relative, cam);
      if (!target) continue;
      const double tu = std::floor(target->u + 0.5);
      const double tv = std::floor(target->v + 0.5);
      if (!(tu >= 0.0 && tv >= 0.0 && tu < w && tv < h)) continue;
      const int iu = static_cast<int>(tu);
      const int iv = static_cast<int>(tv);
      if (out.disparity.valid(iu, iv) && out.disparity.values(iu, iv) >= target->disparity) continue;
      out.disparity.values(iu, iv) = target->disparity;
      out.disparity.valid(iu, iv) = 1;
      owner(iu, iv) = v * w + u;
    }
  }

  if (features > 0) {
    for (int v = 0; v < h; ++v) {
      for (int u = 0; u < w; ++u) {
        const int src = owner(u, v);
        if (src < 0) continue;
        const int su = src % w;
        const int sv = src / w;
        if (!prev_hidden.valid(su, sv)) continue;
        const auto from = prev_hidden.channels.pixel(su, sv);
        auto to = out.hidden.channels.pixel(u, v);
        std::copy(from.begin(), from.end(), to.begin());
        out.hidden.valid(u, v) = 1;
      }
    }
  }
  return out;
}

}  // namespace tstereo
