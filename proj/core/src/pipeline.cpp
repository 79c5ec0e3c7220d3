#include "tstereo/pipeline.hpp"

#include <cmath>
#include <string>

#include "tstereo/error.hpp"
#include "tstereo/geometry.hpp"

namespace tstereo {

std::string_view to_string(PipelineMode mode) {
  return mode == PipelineMode::temporal ? "temporal" : "single_frame";
}

PipelineMode parse_pipeline_mode(std::string_view name) {
  if (name == "temporal") return PipelineMode::temporal;
  if (name == "single_frame") return PipelineMode::single_frame;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected temporal or single_frame)");
}

std::string_view to_string(HintSource source) {
  return source == HintSource::temporal ? "temporal" : "cost_volume";
}

void PipelineConfig::validate() const {
  if (max_disparity < 4) throw ConfigError("max_disparity must be >= 4");
  if (!(theta >= 0.0 && theta <= 2.0)) throw ConfigError("theta must lie in [0, 2]");
  if (descriptor_radius < 1) throw ConfigError("descriptor_radius must be >= 1");
  if (completion.state_channels < 3) throw ConfigError("state_channels must be >= 3");
  if (!(completion.disparity_scale > 0.0) || !(completion.distance_clamp > 0.0))
    throw ConfigError("completion scales must be positive");
  refinement.validate();
}

StereoPipeline::StereoPipeline(PipelineConfig cfg)
    : StereoPipeline(cfg, FusionWeights::random(cfg.completion.state_channels, cfg.seed),
                     FusionWeights::random(cfg.completion.state_channels, cfg.seed + 1)) {}

StereoPipeline::StereoPipeline(PipelineConfig cfg, FusionWeights fusion, FusionWeights update)
    : cfg_(std::move(cfg)), fusion_(std::move(fusion)), update_(std::move(update)) {
  cfg_.validate();
  fusion_.validate();
  update_.validate();
  const int f = cfg_.completion.state_channels;
  if (fusion_.feature_count != f || update_.feature_count != f)
    throw ConfigError("gate weights have " + std::to_string(fusion_.feature_count) + "/" +
                      std::to_string(update_.feature_count) + " features, expected " + std::to_string(f));
}

namespace {

// Warped values at or beyond the hypothesis range cannot seed the search.
void drop_out_of_range(WarpResult& warped, int max_disparity) {
  SemiDenseDisparity& semi = warped.disparity;
  for (int v = 0; v < semi.height(); ++v)
    for (int u = 0; u < semi.width(); ++u) {
      if (!semi.valid(u, v) || semi.values(u, v) < max_disparity) continue;
      semi.valid(u, v) = 0;
      semi.values(u, v) = 0.0;
      if (warped.hidden.feature_count() > 0) {
        warped.hidden.valid(u, v) = 0;
        for (double& x : warped.hidden.channels.pixel(u, v)) x = 0.0;
      }
    }
}

}  // namespace

FrameResult StereoPipeline::process_frame(const Frame& frame, const TemporalCache& cache) const {
  const CameraModel& cam = frame.camera;
  cam.validate();
  if (frame.left.width() != cam.width || frame.left.height() != cam.height || !frame.left.same_shape(frame.right))
    throw ConfigError("frame " + std::to_string(frame.index) + ": image size disagrees with the camera model");
  if (cam.width < cfg_.max_disparity)
    throw ConfigError("image width " + std::to_string(cam.width) + " is smaller than max_disparity");

  const FeatureMap left = extract_features(frame.left, cfg_.descriptor, cfg_.descriptor_radius);
  const FeatureMap right = extract_features(frame.right, cfg_.descriptor, cfg_.descriptor_radius);
  const CostVolume volume = build_cost_volume(left, right, cfg_.max_disparity);

  FrameResult out;
  SemiDenseDisparity semi;
  HiddenState h_prev;
  const bool use_cache = cfg_.mode == PipelineMode::temporal && cache.present;
  if (use_cache) {
    if (!(cache.camera == cam)) throw ConfigError("camera intrinsics changed within the sequence");
    if (cache.hidden.feature_count() != cfg_.completion.state_channels)
      throw ConfigError("cached hidden state has the wrong channel count");
    WarpResult warped = forward_warp(cache.disparity, cache.hidden, relative_pose(cache.pose, frame.pose), cam);
    drop_out_of_range(warped, cfg_.max_disparity);
    if (warped.disparity.valid_count() > 0) {
      semi = std::move(warped.disparity);
      h_prev = std::move(warped.hidden);
      out.hooks.source = HintSource::temporal;
    } else {
      out.hooks.fell_back = true;
      if (logger_) logger_("frame " + std::to_string(frame.index) + ": warped hint is empty, using the cost volume");
    }
  }
  if (out.hooks.source == HintSource::cost_volume) semi = wta_semidense(volume, cfg_.theta);
  out.hooks.hint_valid = semi.valid_count();

  const CompletionOutput init = complete(semi, left, cfg_.completion);
  const HiddenState h0 = fuse_state(init.state, h_prev, fusion_);
  RefinementResult refined = iterate(init.dense, h0, volume, left, cfg_.refinement, update_);
  for (const auto& it : refined.iterations) out.hooks.mean_abs_step.push_back(it.mean_abs_step);

  if (keep_intermediates_) {
    out.initial = init.dense;
    out.iterations = std::move(refined.iterations);
  }
  out.disparity = refined.disparity;
  out.cache.present = true;
  out.cache.disparity = std::move(refined.disparity);
  out.cache.hidden = std::move(refined.hidden);
  out.cache.pose = frame.pose;
  out.cache.camera = cam;
  return out;
}

RunSummary run_sequence(FrameSource& source, const StereoPipeline& pipeline, std::span<FrameSink* const> sinks) {
  RunSummary summary;
  TemporalCache cache;
  while (auto frame = source.next()) {
    FrameResult result = pipeline.process_frame(*frame, cache);
    if (result.hooks.fell_back) ++summary.fallbacks;
    for (FrameSink* sink : sinks) sink->consume(*frame, result);
    cache = std::move(result.cache);
    ++summary.frames;
  }
  if (summary.frames == 0) throw ConfigError("run_sequence: the sequence has no frames");
  for (FrameSink* sink : sinks) sink->finish();
  return summary;
}

}  // namespace tstereo
