#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tstereo/completion.hpp"
#include "tstereo/cost_volume.hpp"
#include "tstereo/features.hpp"
#include "tstereo/frame.hpp"
#include "tstereo/fusion.hpp"
#include "tstereo/refinement.hpp"

namespace tstereo {

enum class PipelineMode { temporal, single_frame };
std::string_view to_string(PipelineMode mode);
/// Throws ConfigError for unknown names.
PipelineMode parse_pipeline_mode(std::string_view name);

struct PipelineConfig {
  PipelineMode mode = PipelineMode::temporal;
  int max_disparity = 64;  ///< D
  double theta = 0.3;      ///< WTA uniqueness margin
  DescriptorKind descriptor = DescriptorKind::zncc_patch;
  int descriptor_radius = 3;
  CompletionConfig completion;
  RefinementConfig refinement;
  std::uint64_t seed = 0;  ///< seeds the default gate weights

  /// Throws ConfigError when parameters are out of range or inconsistent.
  void validate() const;
};

/// Everything carried from one frame to the next.
struct TemporalCache {
  bool present = false;
  DisparityMap disparity;
  HiddenState hidden;
  Pose pose;
  CameraModel camera;

  void clear() { *this = TemporalCache{}; }
};

enum class HintSource { cost_volume, temporal };
std::string_view to_string(HintSource source);

/// Per-frame diagnostics.
struct MetricsHooks {
  HintSource source = HintSource::cost_volume;
  bool fell_back = false;   ///< temporal hint was empty; cost volume used instead
  std::size_t hint_valid = 0;
  std::vector<double> mean_abs_step;  ///< one entry per refinement iteration
};

struct FrameResult {
  DisparityMap disparity;
  MetricsHooks hooks;
  TemporalCache cache;  ///< state for the next frame
  /// Filled only when intermediates are kept: the completed initialization
  /// and every refinement iteration.
  DisparityMap initial;
  std::vector<IterationRecord> iterations;
};

class StereoPipeline {
 public:
  /// Gate weights default to FusionWeights::random(F, seed) for state fusion
  /// and FusionWeights::random(F, seed + 1) for the refinement update.
  explicit StereoPipeline(PipelineConfig cfg);
  StereoPipeline(PipelineConfig cfg, FusionWeights fusion, FusionWeights update);

  const PipelineConfig& config() const noexcept { return cfg_; }
  const FusionWeights& fusion_weights() const noexcept { return fusion_; }
  const FusionWeights& update_weights() const noexcept { return update_; }

  /// Optional diagnostic sink for fallbacks and other notices.
  void set_logger(std::function<void(const std::string&)> logger) { logger_ = std::move(logger); }
  /// Keep per-iteration outputs in FrameResult (for losses and dumps).
  void set_keep_intermediates(bool keep) { keep_intermediates_ = keep; }

  /// One step of the temporal chain. In single-frame mode the cache is ignored.
  FrameResult process_frame(const Frame& frame, const TemporalCache& cache) const;

 private:
  PipelineConfig cfg_;
  FusionWeights fusion_;
  FusionWeights update_;
  std::function<void(const std::string&)> logger_;
  bool keep_intermediates_ = false;
};

/// Lazily produced frames; next() returns empty at the end of the sequence.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<Frame> next() = 0;
};

/// Receives each frame's output in order.
class FrameSink {
 public:
  virtual ~FrameSink() = default;
  virtual void consume(const Frame& frame, const FrameResult& result) = 0;
  /// Called once after the last frame.
  virtual void finish() {}
};

struct RunSummary {
  int frames = 0;
  int fallbacks = 0;
};

/// Streams every frame of `source` through the pipeline, keeping only one
/// cache and one frame alive. Throws ConfigError for an empty source.
RunSummary run_sequence(FrameSource& source, const StereoPipeline& pipeline, std::span<FrameSink* const> sinks);

}  // namespace tstereo
