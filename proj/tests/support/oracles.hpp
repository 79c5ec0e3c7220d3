#pragma once

// Straightforward re-implementations used as references by the tests. They
// favour obviousness over speed and share no code with the library beyond
// the plain data types.

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "tstereo/geometry.hpp"
#include "tstereo/image.hpp"
#include "tstereo/refinement.hpp"

namespace oracle {

using tstereo::DisparityMap;
using tstereo::Image;
using tstereo::Mask;

struct WtaDecision {
  bool valid = false;
  int best = 0;
};

/// Ranks all hypotheses (value descending, index ascending) and takes the
/// first one that is not adjacent to the winner as the runner-up.
WtaDecision wta(std::span<const double> column, double threshold);

/// Linear interpolation straight from the two bracketing samples.
double interpolate(std::span<const double> column, double d);

/// Enumerates every integer hypothesis farther than 1.5 from gt.
std::optional<double> cost_volume_loss_pixel(std::span<const double> column, double gt, double eta);

double l1(const DisparityMap& d, const DisparityMap& gt, const Mask& valid);

double disparity_loss(const DisparityMap& d_dc, const std::vector<DisparityMap>& d_dsr,
                      const std::vector<DisparityMap>& d_gdp, const DisparityMap& gt, const Mask& valid,
                      double gamma, double lambda_dc, double lambda_gdp);

double gradient_loss(const DisparityMap& g_du, const DisparityMap& g_dv, const DisparityMap& d_gdp,
                     const DisparityMap& gt, const Mask& valid);

struct TemporalValues {
  std::size_t n = 0;
  double abs_dd = 0.0;
  double relu_de = 0.0;
};

/// Bilinear sampling at p + flow and pinhole re-expression written out
/// component by component.
std::optional<TemporalValues> temporal(const DisparityMap& d_t, const DisparityMap& d_t1, const Image<double>& flow_u,
                                       const Image<double>& flow_v, const Mask& flow_valid,
                                       const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
                                       const tstereo::CameraModel& cam, const DisparityMap& gt_t,
                                       const DisparityMap& gt_t1, const Mask& region);

/// Recursive pull-push: average valid 2x2 blocks, fill the coarser level,
/// then fill holes from its bilinear upsampling.
DisparityMap pull_push(const DisparityMap& values, const Mask& valid);

/// Per-pixel median of the valid samples followed by the 3x3 cosine-weighted
/// mean and the clamp, computed pixel by pixel.
tstereo::GradientField refine_gradients(const std::vector<tstereo::GradientSample>& samples,
                                        const tstereo::Tensor3<double>& context, double clamp);

/// Plane n . X = offset, optionally restricted to clip . X <= clip_max.
struct InfinitePlane {
  Eigen::Vector3d normal;
  double offset = 0.0;
  Eigen::Vector3d clip = Eigen::Vector3d::Zero();
  double clip_max = 0.0;
};

/// Counts frame-t pixels whose surface point lies behind another surface when
/// seen from the next camera (or behind that camera), using explicit
/// ray-plane intersections.
int temporal_occlusion_count(const std::vector<InfinitePlane>& planes, const tstereo::CameraModel& cam,
                             const tstereo::Pose& current, const tstereo::Pose& next, double tolerance);

}  // namespace oracle
