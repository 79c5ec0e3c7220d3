#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "tstereo/evaluation.hpp"

namespace tstereo {

/// One JSON object: sequence, frame, region, epe, bad1, bad3, d1, abs_dd,
/// relu_de, n_pixels. Absent metrics are null.
std::string metrics_json_line(std::string_view sequence, int frame, const MetricsReport& report);

/// Streams JSONL to a temp file; close() renames it into place.
class MetricsJsonlWriter {
 public:
  MetricsJsonlWriter(std::filesystem::path path, std::string sequence);
  ~MetricsJsonlWriter();
  MetricsJsonlWriter(const MetricsJsonlWriter&) = delete;
  MetricsJsonlWriter& operator=(const MetricsJsonlWriter&) = delete;

  void write(const FrameMetrics& metrics);
  void close();

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::string sequence_;
  std::ofstream out_;
  bool closed_ = false;
};

/// Per-region means: sequence,region,frames,n_pixels,epe,bad1,bad3,d1,abs_dd,relu_de.
void write_metrics_summary_csv(const std::filesystem::path& path, std::string_view sequence,
                               const std::vector<SummaryRow>& rows);

}  // namespace tstereo
