#include "fixtures.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include "tstereo/sequence.hpp"

namespace fixture {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  std::string pattern = (fs::temp_directory_path() / (tag + "-XXXXXX")).string();
  if (::mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed for " + pattern);
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

tstereo::Image<double> random_map(int w, int h, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  tstereo::Image<double> out(w, h);
  for (double& x : out.pixels()) x = dist(rng);
  return out;
}

tstereo::Mask random_mask(int w, int h, double p_valid, Rng& rng) {
  std::bernoulli_distribution dist(p_valid);
  tstereo::Mask out(w, h);
  for (auto& x : out.pixels()) x = dist(rng) ? 1 : 0;
  return out;
}

std::vector<double> random_column(int depth, Rng& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(depth));
  for (double& x : out) x = dist(rng);
  return out;
}

const tstereo::SummaryRow& SceneRun::row(tstereo::Region region) const {
  for (const auto& r : summary)
    if (r.region == region) return r;
  throw std::runtime_error("missing summary row");
}

namespace {

class Collector : public tstereo::FrameSink {
 public:
  Collector(SceneRun& run, bool keep) : run_(run), keep_(keep) {}
  void consume(const tstereo::Frame&, const tstereo::FrameResult& result) override {
    run_.steps.push_back(result.hooks.mean_abs_step);
    if (result.hooks.fell_back) ++run_.fallbacks;
    if (keep_) run_.disparities.push_back(result.disparity);
  }

 private:
  SceneRun& run_;
  bool keep_;
};

}  // namespace

SceneRun run_scene(const tstereo::SceneSpec& spec, const tstereo::PipelineConfig& cfg, bool keep_disparities) {
  SceneRun run;
  tstereo::SyntheticFrameSource source(spec);
  tstereo::StereoPipeline pipeline(cfg);
  tstereo::MetricsAggregator aggregator;
  tstereo::EvaluationSink evaluation(source, tstereo::FlowSampling::bilinear);
  evaluation.set_aggregator(&aggregator);
  evaluation.set_callback([&run](const tstereo::FrameMetrics& m) { run.frames.push_back(m); });
  Collector collector(run, keep_disparities);
  tstereo::FrameSink* sinks[] = {&collector, &evaluation};
  tstereo::run_sequence(source, pipeline, sinks);
  run.summary = aggregator.rows();
  return run;
}

tstereo::SceneSpec static_standard_scene(int frames) {
  tstereo::SceneSpec spec = tstereo::standard_scene({});
  spec.trajectory.assign(static_cast<std::size_t>(frames), spec.trajectory.front());
  return spec;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fixture
