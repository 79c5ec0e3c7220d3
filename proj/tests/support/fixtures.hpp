#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tstereo/evaluation.hpp"
#include "tstereo/pipeline.hpp"
#include "tstereo/synthetic.hpp"

namespace fixture {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "tstereo");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

using Rng = std::mt19937_64;

tstereo::Image<double> random_map(int w, int h, double lo, double hi, Rng& rng);
tstereo::Mask random_mask(int w, int h, double p_valid, Rng& rng);
std::vector<double> random_column(int depth, Rng& rng);

/// Everything a test wants to know about one pipeline run over a scene.
struct SceneRun {
  std::vector<tstereo::SummaryRow> summary;       ///< ALL then OCC
  std::vector<tstereo::FrameMetrics> frames;      ///< per-frame reports
  std::vector<std::vector<double>> steps;         ///< per-frame mean |step| per iteration
  std::vector<tstereo::DisparityMap> disparities; ///< only when requested
  int fallbacks = 0;

  const tstereo::SummaryRow& row(tstereo::Region region) const;
};

/// Streams `spec` through a pipeline built from `cfg`, evaluating each frame
/// against the scene's ground truth.
SceneRun run_scene(const tstereo::SceneSpec& spec, const tstereo::PipelineConfig& cfg, bool keep_disparities = false);

/// Scene with `frames` copies of the first standard pose.
tstereo::SceneSpec static_standard_scene(int frames);

/// Read a whole file; empty when it cannot be opened.
std::string slurp(const std::filesystem::path& path);

}  // namespace fixture
