#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tstereo/geometry.hpp"
#include "tstereo/image.hpp"
#include "tstereo/losses_metrics.hpp"

namespace tstereo {

/// Reference data for one frame. Flow maps are empty on the last frame.
struct GroundTruth {
  DisparityMap disparity;
  Mask valid;      ///< finite, positive GT
  Mask occlusion;  ///< OCC region
  Image<double> flow_u;
  Image<double> flow_v;
  Mask flow_valid;

  bool has_flow() const noexcept { return !flow_u.empty(); }
};

/// Valid mask for a GT disparity map: finite and > 0.
Mask gt_valid_mask(const DisparityMap& gt);

struct EvalFrame {
  int index = 0;
  Pose pose;
  CameraModel camera;
  DisparityMap disparity;
  GroundTruth gt;
};

struct FrameMetrics {
  int frame = 0;
  std::vector<MetricsReport> reports;  ///< ALL then OCC
};

/// Accuracy metrics for one frame, with the temporal fields empty.
FrameMetrics evaluate_frame(const EvalFrame& frame);

/// Temporal metrics between two consecutive frames for one region of the
/// first. Flow comes from `current.gt`.
std::optional<TemporalMetrics> evaluate_pair(const EvalFrame& current, const EvalFrame& next, const Mask& region,
                                             FlowSampling sampling);

/// Streaming evaluator. Temporal metrics of frame t need frame t+1, so each
/// push returns the report of the previous frame; finish() flushes the last
/// one with absent temporal fields. Holds at most one frame.
class SequenceEvaluator {
 public:
  explicit SequenceEvaluator(FlowSampling sampling = FlowSampling::bilinear) : sampling_(sampling) {}

  std::optional<FrameMetrics> push(EvalFrame frame);
  std::optional<FrameMetrics> finish();

 private:
  FlowSampling sampling_;
  std::optional<EvalFrame> pending_;
};

/// Mean of each metric over the frames where it is present.
struct SummaryRow {
  Region region = Region::all;
  int frames = 0;
  std::size_t n_pixels = 0;
  std::optional<double> epe, bad1, bad3, d1, abs_dd, relu_de;
};

class MetricsAggregator {
 public:
  void add(const FrameMetrics& metrics);
  std::vector<SummaryRow> rows() const;

 private:
  struct Acc {
    int frames = 0;
    std::size_t n_pixels = 0;
    double sums[6] = {};
    int counts[6] = {};
  };
  Acc all_, occ_;
};

}  // namespace tstereo
