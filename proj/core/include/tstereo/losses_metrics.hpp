#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tstereo/cost_volume.hpp"
#include "tstereo/geometry.hpp"
#include "tstereo/image.hpp"
#include "tstereo/refinement.hpp"

namespace tstereo {

struct LossWeights {
  double eta = 0.5;         ///< contrastive margin
  double gamma = 0.9;       ///< per-iteration decay
  double lambda_dc = 0.1;   ///< completion term weight
  double lambda_gdp = 1.2;  ///< propagation term weight

  void validate() const;
};

/// Linear interpolation of a cost column at sub-pixel d:
///   (d - floor d) C(floor d + 1) + (floor d + 1 - d) C(floor d).
/// Throws DomainError unless 0 <= d <= D-1.
double psi(std::span<const double> column, double d);

/// Contrastive cost-volume loss, averaged over pixels with valid GT <= D-1:
///   1 - psi(gt) + max(eta + C(d_nm) - psi(gt), 0)
/// where d_nm is the best integer hypothesis outside [gt - 1.5, gt + 1.5].
/// Throws UndefinedLossError when no pixel contributes.
double cost_volume_loss(const CostVolume& volume, const DisparityMap& gt, const Mask& gt_valid, double eta);

/// Per-pixel term of cost_volume_loss; empty when the exclusion interval
/// leaves no hypothesis.
std::optional<double> cost_volume_loss_pixel(std::span<const double> column, double gt, double eta);

/// Mean |d - gt| over valid GT pixels. Throws UndefinedLossError if none.
double l1_loss(const DisparityMap& d, const DisparityMap& gt, const Mask& gt_valid);

/// lambda_dc L_dc + sum_i gamma^(N-i) (L_dsr^i + lambda_gdp L_gdp^i).
double combine_disparity_loss(double l_dc, std::span<const double> l_dsr, std::span<const double> l_gdp,
                              const LossWeights& weights);

/// Disparity loss over completion output and per-iteration outputs.
double disparity_loss(const DisparityMap& d_dc, std::span<const DisparityMap> d_dsr,
                      std::span<const DisparityMap> d_gdp, const DisparityMap& gt, const Mask& gt_valid,
                      const LossWeights& weights);

/// Forward-difference gradient; `valid` marks pixels whose stencil
/// (u,v), (u+1,v), (u,v+1) is inside the image and inside `mask`.
struct ForwardGradient {
  GradientField field;
  Mask valid;
};
ForwardGradient forward_gradient(const DisparityMap& d, const Mask& mask);

/// mean |g_gsr - g_gt|_1 + mean |grad d_gdp - g_gt|_1 over pixels with a
/// fully valid GT stencil.
double gradient_loss(const GradientField& g_gsr, const DisparityMap& d_gdp, const DisparityMap& gt,
                     const Mask& gt_valid);

inline double total_loss(double cv, double disp, double grad) { return cv + disp + grad; }

enum class Region { all, occ };
std::string_view to_string(Region region);

/// One row of the evaluation report. Absent values mean the region had no
/// contributing pixel.
struct MetricsReport {
  Region region = Region::all;
  std::size_t n_pixels = 0;
  std::optional<double> epe, bad1, bad3, d1;
  std::optional<double> abs_dd, relu_de;
};

struct AccuracyMetrics {
  std::size_t n_pixels = 0;
  double epe = 0.0;
  double bad1 = 0.0;
  double bad3 = 0.0;
  double d1 = 0.0;
};

/// EPE, >1px, >3px and D1 (error > 3 px and > 5% of GT) in percent. Empty
/// when the region has no pixel.
std::optional<AccuracyMetrics> accuracy_metrics(const DisparityMap& d, const DisparityMap& gt, const Mask& region);

enum class FlowSampling { bilinear, nearest };

/// Correspondence from frame t to frame t+1.
struct TemporalAlignment {
  Image<double> flow_u;  ///< target column offset
  Image<double> flow_v;
  Mask flow_valid;
  Pose next_to_current;  ///< maps frame t+1 camera points into frame t
  CameraModel camera;
  FlowSampling sampling = FlowSampling::bilinear;
};

struct TemporalMetrics {
  std::size_t n_pixels = 0;
  double abs_dd = 0.0;
  double relu_de = 0.0;
};

/// Temporal consistency. For each region pixel p of frame t with valid flow,
/// d^{t+1} and gt^{t+1} are sampled at p + flow(p) (bilinear by default), re-expressed
/// as frame-t disparities through the depth transform, and compared with
/// d^t and e^t = |d^t - gt^t|:
///   |dd|      = mean |d~^{t+1} - d^t|
///   relu(de)  = mean max(|d~^{t+1} - gt~^{t+1}| - e^t, 0)
/// Samples outside the image or with non-positive disparity are excluded.
std::optional<TemporalMetrics> temporal_metrics(const DisparityMap& d_t, const DisparityMap& d_t1,
                                                const TemporalAlignment& alignment, const DisparityMap& gt_t,
                                                const DisparityMap& gt_t1, const Mask& region);

/// Re-expresses a frame-(t+1) disparity observed at pixel (u, v) in frame t.
std::optional<double> reexpress_disparity(double u, double v, double disparity, const Pose& next_to_current,
                                          const CameraModel& cam);

}  // namespace tstereo
