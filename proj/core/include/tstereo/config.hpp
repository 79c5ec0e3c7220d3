#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tstereo/losses_metrics.hpp"
#include "tstereo/pipeline.hpp"

namespace tstereo {

/// Everything a `run` or `eval` invocation needs.
struct RunConfig {
  PipelineConfig pipeline;
  LossWeights losses;
  FlowSampling flow_sampling = FlowSampling::bilinear;
  int threads = 0;  ///< 0 keeps the OpenMP default
  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path fusion_weights;  ///< optional TCSW files
  std::filesystem::path update_weights;
  bool write_png = false;  ///< also emit 16-bit KITTI PNGs

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Keys understood by apply_setting, in documentation order.
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value. Throws ConfigError for unknown keys
/// (listing the accepted ones) or malformed values.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Parses "key=value".
void apply_assignment(RunConfig& cfg, std::string_view assignment);

/// Applies a config file: "key = value" lines, '#' comments. Syntax errors
/// raise ParseError naming the line; bad keys or values raise ConfigError
/// with the line prefixed.
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Serializes every key in config_keys() order.
std::string to_config_text(const RunConfig& cfg);

}  // namespace tstereo
