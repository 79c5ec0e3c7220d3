#include <benchmark/benchmark.h>

#include "tstereo/cost_volume.hpp"
#include "tstereo/features.hpp"
#include "tstereo/pipeline.hpp"
#include "tstereo/refinement.hpp"
#include "tstereo/synthetic.hpp"

using namespace tstereo;

namespace {

const SyntheticFrame& frame0() {
  static const SyntheticFrame f = generate_frame(standard_scene({}), 0);
  return f;
}

void BM_FeatureExtraction(benchmark::State& state) {
  const auto kind = state.range(0) == 0 ? DescriptorKind::zncc_patch : DescriptorKind::census;
  const int radius = kind == DescriptorKind::zncc_patch ? 3 : 2;
  for (auto _ : state) benchmark::DoNotOptimize(extract_features(frame0().frame.left, kind, radius));
}
BENCHMARK(BM_FeatureExtraction)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CostVolume(benchmark::State& state) {
  const FeatureMap l = extract_features(frame0().frame.left, DescriptorKind::zncc_patch, 3);
  const FeatureMap r = extract_features(frame0().frame.right, DescriptorKind::zncc_patch, 3);
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(build_cost_volume(l, r, d));
  state.SetItemsProcessed(state.iterations() * l.width() * l.height() * d);
}
BENCHMARK(BM_CostVolume)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Refinement(benchmark::State& state) {
  const FeatureMap l = extract_features(frame0().frame.left, DescriptorKind::zncc_patch, 3);
  const FeatureMap r = extract_features(frame0().frame.right, DescriptorKind::zncc_patch, 3);
  const CostVolume volume = build_cost_volume(l, r, 64);
  RefinementConfig cfg;
  cfg.iterations = static_cast<int>(state.range(0));
  HiddenState h0(l.width(), l.height(), 16);
  const FusionWeights weights = FusionWeights::random(16, 1);
  for (auto _ : state) benchmark::DoNotOptimize(iterate(frame0().gt_disparity, h0, volume, l, cfg, weights));
}
BENCHMARK(BM_Refinement)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_PipelineFrame(benchmark::State& state) {
  PipelineConfig cfg;
  cfg.mode = state.range(0) == 0 ? PipelineMode::single_frame : PipelineMode::temporal;
  const StereoPipeline pipeline(cfg);
  const SyntheticFrame f1 = generate_frame(standard_scene({}), 1);
  const TemporalCache cache = pipeline.process_frame(frame0().frame, TemporalCache{}).cache;
  for (auto _ : state) benchmark::DoNotOptimize(pipeline.process_frame(f1.frame, cache));
}
BENCHMARK(BM_PipelineFrame)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
