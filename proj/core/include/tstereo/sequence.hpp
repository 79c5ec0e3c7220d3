#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tstereo/evaluation.hpp"
#include "tstereo/io.hpp"
#include "tstereo/pipeline.hpp"
#include "tstereo/reports.hpp"
#include "tstereo/synthetic.hpp"

namespace tstereo {

/// On-disk layout of a sequence directory:
///   camera.txt, poses.txt, left/NNNNNN.png, right/NNNNNN.png and, when
///   ground truth exists, disp_gt/NNNNNN.pfm, occ/NNNNNN.pgm,
///   flow/NNNNNN_u.pfm, flow/NNNNNN_v.pfm (not for the last frame).
struct SequenceLayout {
  fs::path root;

  fs::path camera() const { return root / "camera.txt"; }
  fs::path poses() const { return root / "poses.txt"; }
  fs::path left(int i) const { return root / "left" / (frame_stem(i) + ".png"); }
  fs::path right(int i) const { return root / "right" / (frame_stem(i) + ".png"); }
  fs::path gt_disparity(int i) const { return root / "disp_gt" / (frame_stem(i) + ".pfm"); }
  fs::path occlusion(int i) const { return root / "occ" / (frame_stem(i) + ".pgm"); }
  fs::path flow_u(int i) const { return root / "flow" / (frame_stem(i) + "_u.pfm"); }
  fs::path flow_v(int i) const { return root / "flow" / (frame_stem(i) + "_v.pfm"); }
};

/// Output layout of `run`: disp/NNNNNN.pfm (+ .png), metrics.jsonl,
/// metrics_summary.csv.
struct OutputLayout {
  fs::path root;

  fs::path disparity_pfm(int i) const { return root / "disp" / (frame_stem(i) + ".pfm"); }
  fs::path disparity_png(int i) const { return root / "disp" / (frame_stem(i) + ".png"); }
  fs::path metrics() const { return root / "metrics.jsonl"; }
  fs::path summary() const { return root / "metrics_summary.csv"; }
};

class GroundTruthProvider {
 public:
  virtual ~GroundTruthProvider() = default;
  virtual bool has_ground_truth() const = 0;
  /// Throws when unavailable.
  virtual GroundTruth ground_truth(int index) = 0;
};

/// Lazily loads frames from a sequence directory.
class SequenceReader : public FrameSource, public GroundTruthProvider {
 public:
  /// Reads camera.txt and poses.txt and checks that every frame has both
  /// images and a pose. Frames must be numbered 0..N-1.
  explicit SequenceReader(fs::path root);

  int frame_count() const noexcept { return frame_count_; }
  const CameraModel& camera() const noexcept { return camera_; }
  const std::vector<StampedPose>& poses() const noexcept { return poses_; }
  std::string name() const;

  std::optional<Frame> next() override;
  Frame load_frame(int index) const;

  bool has_ground_truth() const override;
  GroundTruth ground_truth(int index) override;

 private:
  SequenceLayout layout_;
  CameraModel camera_;
  std::vector<StampedPose> poses_;
  int frame_count_ = 0;
  int cursor_ = 0;
};

/// Renders frames of a scene on demand, keeping only the latest one.
class SyntheticFrameSource : public FrameSource, public GroundTruthProvider {
 public:
  explicit SyntheticFrameSource(SceneSpec spec);

  std::optional<Frame> next() override;
  bool has_ground_truth() const override { return true; }
  /// Only the most recently produced frame is available.
  GroundTruth ground_truth(int index) override;

 private:
  SceneSpec spec_;
  int cursor_ = 0;
  std::optional<SyntheticFrame> current_;
};

GroundTruth ground_truth_of(const SyntheticFrame& frame);

/// JSON scene description:
///   {"camera": {fx, fy, cx, cy, baseline, width, height},
///    "max_disparity": 64, "seed": 7, "noise_sigma": 0,
///    "planes": [{"normal": [x,y,z], "offset": o,
///                "texture": {"kind": "noise"|"checker", "seed": s, "scale": m},
///                "bounds": {"center": [x,y,z], "half_s": a, "half_t": b}}],
///    "trajectory": [{"t": [x,y,z], "q": [qx,qy,qz,qw]}]}
/// "bounds", "texture", "seed", "noise_sigma" and "max_disparity" are
/// optional. Throws ParseError naming the byte or the offending field.
SceneSpec read_scene_file(const fs::path& path);
void write_scene_file(const fs::path& path, const SceneSpec& spec);

/// Writes one frame's images and ground truth below `root`.
void write_synthetic_frame(const SequenceLayout& layout, const SyntheticFrame& frame);
/// Renders and writes a whole scene, one frame in memory at a time.
void write_synthetic_sequence(const fs::path& root, const SceneSpec& spec);

/// Writes disp/NNNNNN.pfm (and optionally the KITTI PNG) per frame.
class DisparityWriterSink : public FrameSink {
 public:
  DisparityWriterSink(fs::path output_root, bool write_png);
  void consume(const Frame& frame, const FrameResult& result) override;

 private:
  OutputLayout layout_;
  bool write_png_;
};

/// Evaluates each output against ground truth. Reports are forwarded to the
/// optional JSONL writer, aggregator and callback.
class EvaluationSink : public FrameSink {
 public:
  EvaluationSink(GroundTruthProvider& gt, FlowSampling sampling);

  void set_writer(MetricsJsonlWriter* writer) { writer_ = writer; }
  void set_aggregator(MetricsAggregator* aggregator) { aggregator_ = aggregator; }
  void set_callback(std::function<void(const FrameMetrics&)> callback) { callback_ = std::move(callback); }
  // Score predictions as stored in a float32 PFM so offline eval reproduces the numbers.
  void set_float32_predictions(bool on) { float32_ = on; }

  void consume(const Frame& frame, const FrameResult& result) override;
  void finish() override;

 private:
  void emit(const FrameMetrics& metrics);

  GroundTruthProvider& gt_;
  SequenceEvaluator evaluator_;
  MetricsJsonlWriter* writer_ = nullptr;
  MetricsAggregator* aggregator_ = nullptr;
  std::function<void(const FrameMetrics&)> callback_;
  bool float32_ = false;
};

}  // namespace tstereo
