#include "tstereo/evaluation.hpp"

#include <cmath>

#include "tstereo/error.hpp"

namespace tstereo {

Mask gt_valid_mask(const DisparityMap& gt) {
  Mask valid(gt.width(), gt.height(), 0);
  for (int v = 0; v < gt.height(); ++v)
    for (int u = 0; u < gt.width(); ++u) valid(u, v) = std::isfinite(gt(u, v)) && gt(u, v) > 0.0 ? 1 : 0;
  return valid;
}

namespace {

Mask region_mask(const GroundTruth& gt, Region region) {
  Mask m = gt.valid;
  if (region == Region::occ) {
    for (int v = 0; v < m.height(); ++v)
      for (int u = 0; u < m.width(); ++u) m(u, v) = m(u, v) && gt.occlusion(u, v) ? 1 : 0;
  }
  return m;
}

void check_frame(const EvalFrame& f) {
  const DisparityMap& d = f.disparity;
  const GroundTruth& gt = f.gt;
  if (!d.same_shape(gt.disparity) || !d.same_shape(gt.valid) || !d.same_shape(gt.occlusion))
    throw ConfigError("evaluation: frame " + std::to_string(f.index) + " has mismatched disparity/GT shapes");
  if (gt.has_flow() && (!d.same_shape(gt.flow_u) || !d.same_shape(gt.flow_v) || !d.same_shape(gt.flow_valid)))
    throw ConfigError("evaluation: frame " + std::to_string(f.index) + " has mismatched flow shapes");
}

}  // namespace

FrameMetrics evaluate_frame(const EvalFrame& frame) {
  check_frame(frame);
  FrameMetrics out;
  out.frame = frame.index;
  for (Region region : {Region::all, Region::occ}) {
    MetricsReport report;
    report.region = region;
    const auto acc = accuracy_metrics(frame.disparity, frame.gt.disparity, region_mask(frame.gt, region));
    if (acc) {
      report.n_pixels = acc->n_pixels;
      report.epe = acc->epe;
      report.bad1 = acc->bad1;
      report.bad3 = acc->bad3;
      report.d1 = acc->d1;
    }
    out.reports.push_back(report);
  }
  return out;
}

std::optional<TemporalMetrics> evaluate_pair(const EvalFrame& current, const EvalFrame& next, const Mask& region,
                                             FlowSampling sampling) {
  if (!current.gt.has_flow()) return std::nullopt;
  if (!current.disparity.same_shape(next.disparity))
    throw ConfigError("evaluation: consecutive frames differ in size");
  TemporalAlignment alignment{current.gt.flow_u, current.gt.flow_v, current.gt.flow_valid,
                              relative_pose(next.pose, current.pose), current.camera, sampling};
  return temporal_metrics(current.disparity, next.disparity, alignment, current.gt.disparity, next.gt.disparity,
                          region);
}

std::optional<FrameMetrics> SequenceEvaluator::push(EvalFrame frame) {
  check_frame(frame);
  std::optional<FrameMetrics> out;
  if (pending_) {
    out = evaluate_frame(*pending_);
    for (MetricsReport& report : out->reports) {
      const auto tm = evaluate_pair(*pending_, frame, region_mask(pending_->gt, report.region), sampling_);
      if (tm) {
        report.abs_dd = tm->abs_dd;
        report.relu_de = tm->relu_de;
      }
    }
  }
  pending_ = std::move(frame);
  return out;
}

std::optional<FrameMetrics> SequenceEvaluator::finish() {
  if (!pending_) return std::nullopt;
  FrameMetrics out = evaluate_frame(*pending_);
  pending_.reset();
  return out;
}

void MetricsAggregator::add(const FrameMetrics& metrics) {
  for (const MetricsReport& r : metrics.reports) {
    Acc& acc = r.region == Region::all ? all_ : occ_;
    ++acc.frames;
    acc.n_pixels += r.n_pixels;
    const std::optional<double>* fields[6] = {&r.epe, &r.bad1, &r.bad3, &r.d1, &r.abs_dd, &r.relu_de};
    for (int i = 0; i < 6; ++i)
      if (*fields[i]) {
        acc.sums[i] += **fields[i];
        ++acc.counts[i];
      }
  }
}

std::vector<SummaryRow> MetricsAggregator::rows() const {
  std::vector<SummaryRow> out;
  for (Region region : {Region::all, Region::occ}) {
    const Acc& acc = region == Region::all ? all_ : occ_;
    SummaryRow row;
    row.region = region;
    row.frames = acc.frames;
    row.n_pixels = acc.n_pixels;
    std::optional<double>* fields[6] = {&row.epe, &row.bad1, &row.bad3, &row.d1, &row.abs_dd, &row.relu_de};
    for (int i = 0; i < 6; ++i)
      if (acc.counts[i] > 0) *fields[i] = acc.sums[i] / acc.counts[i];
    out.push_back(row);
  }
  return out;
}

}  // namespace tstereo
