#include "tstereo/reports.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>

#include "tstereo/error.hpp"
#include "tstereo/io.hpp"

namespace tstereo {

namespace {

nlohmann::ordered_json optional_number(const std::optional<double>& x) {
  return x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr);
}

std::string csv_number(const std::optional<double>& x) {
  if (!x) return {};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", *x);
  return buf;
}

}  // namespace

std::string metrics_json_line(std::string_view sequence, int frame, const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["sequence"] = std::string(sequence);
  j["frame"] = frame;
  j["region"] = std::string(to_string(report.region));
  j["epe"] = optional_number(report.epe);
  j["bad1"] = optional_number(report.bad1);
  j["bad3"] = optional_number(report.bad3);
  j["d1"] = optional_number(report.d1);
  j["abs_dd"] = optional_number(report.abs_dd);
  j["relu_de"] = optional_number(report.relu_de);
  j["n_pixels"] = report.n_pixels;
  return j.dump();
}

MetricsJsonlWriter::MetricsJsonlWriter(std::filesystem::path path, std::string sequence)
    : path_(std::move(path)), tmp_(path_.string() + ".tmp"), sequence_(std::move(sequence)) {
  out_.open(tmp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw IoError("cannot open " + tmp_.string() + " for writing");
}

MetricsJsonlWriter::~MetricsJsonlWriter() {
  if (!closed_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(tmp_, ec);
  }
}

void MetricsJsonlWriter::write(const FrameMetrics& metrics) {
  for (const MetricsReport& r : metrics.reports) out_ << metrics_json_line(sequence_, metrics.frame, r) << '\n';
  if (!out_) throw IoError("failed to write " + tmp_.string());
}

void MetricsJsonlWriter::close() {
  if (closed_) return;
  out_.close();
  if (!out_) throw IoError("failed to write " + tmp_.string());
  std::error_code ec;
  std::filesystem::rename(tmp_, path_, ec);
  if (ec) throw IoError("cannot rename " + tmp_.string() + " to " + path_.string());
  closed_ = true;
}

void write_metrics_summary_csv(const std::filesystem::path& path, std::string_view sequence,
                               const std::vector<SummaryRow>& rows) {
  std::string out = "sequence,region,frames,n_pixels,epe,bad1,bad3,d1,abs_dd,relu_de\n";
  for (const SummaryRow& r : rows) {
    out += std::string(sequence) + "," + std::string(to_string(r.region)) + "," + std::to_string(r.frames) + "," +
           std::to_string(r.n_pixels);
    for (const auto* x : {&r.epe, &r.bad1, &r.bad3, &r.d1, &r.abs_dd, &r.relu_de}) out += "," + csv_number(*x);
    out += "\n";
  }
  write_file_atomic(path, out);
}

}  // namespace tstereo
