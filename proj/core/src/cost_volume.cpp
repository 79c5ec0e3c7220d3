#include "tstereo/cost_volume.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

#include "tstereo/error.hpp"
#include "tstereo/parallel.hpp"

namespace tstereo {

CostVolume build_cost_volume(const FeatureMap& left, const FeatureMap& right, int max_disparity) {
  if (!left.channels.same_shape(right.channels))
    throw ConfigError("build_cost_volume: left/right feature shapes differ");
  if (left.kind != right.kind) throw ConfigError("build_cost_volume: left/right descriptor kinds differ");
  const int w = left.width();
  const int h = left.height();
  const int k = left.channel_count();
  if (max_disparity < 1 || max_disparity > w)
    throw ConfigError("build_cost_volume: D=" + std::to_string(max_disparity) + " outside [1, " +
                      std::to_string(w) + "]");

  auto norms = [&](const FeatureMap& f) {
    Image<double> n(w, h);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        double s = 0.0;
        for (double x : f.channels.pixel(u, v)) s += x * x;
        n(u, v) = std::sqrt(s);
      }
    return n;
  };
  const Image<double> left_norm = norms(left);
  const Image<double> right_norm = norms(right);

  CostVolume volume(w, h, max_disparity, kInvalidCost);
  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      const auto fl = left.channels.pixel(u, v);
      const double nl = left_norm(u, v);
      const int d_end = std::min(max_disparity - 1, u);
      for (int d = 0; d <= d_end; ++d) {
        const auto fr = right.channels.pixel(u - d, v);
        const double denom = nl * right_norm(u - d, v);
        double dot = 0.0;
        for (int c = 0; c < k; ++c) dot += fl[c] * fr[c];
        volume.at(u, v, d) = denom > 0.0 ? std::clamp(dot / denom, -1.0, 1.0) : 0.0;
      }
    }
  });
  return volume;
}

WtaResult wta_column(std::span<const double> column, double threshold) {
  const int depth = static_cast<int>(column.size());
  WtaResult r;
  r.best = 0;
  for (int d = 1; d < depth; ++d)
    if (column[d] > column[r.best]) r.best = d;
  r.runner_up = -1;
  for (int d = 0; d < depth; ++d) {
    if (d >= r.best - 1 && d <= r.best + 1) continue;
    if (r.runner_up < 0 || column[d] > column[r.runner_up]) r.runner_up = d;
  }
  r.valid = r.runner_up >= 0 && !is_invalid_cost(column[r.best]) &&
            column[r.best] - column[r.runner_up] > threshold;
  return r;
}

SemiDenseDisparity wta_semidense(const CostVolume& volume, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 2.0))
    throw ConfigError("wta_semidense: threshold must lie in [0, 2]");
  if (volume.depth() < 4) throw ConfigError("wta_semidense: needs at least 4 disparity hypotheses");
  const int w = volume.width();
  const int h = volume.height();
  SemiDenseDisparity out{DisparityMap(w, h, 0.0), Mask(w, h, 0)};
  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      const WtaResult r = wta_column(volume.column(u, v), threshold);
      if (!r.valid) continue;
      out.values(u, v) = r.best;
      out.valid(u, v) = 1;
    }
  });
  return out;
}

double sample_column(std::span<const double> column, double d) {
  const int last = static_cast<int>(column.size()) - 1;
  const double x = std::clamp(d, 0.0, static_cast<double>(last));
  const int i = static_cast<int>(std::floor(x));
  const double frac = x - i;
  if (frac == 0.0 || i >= last) return column[std::min(i, last)];
  const double lo = column[i];
  const double hi = column[i + 1];
  if (is_invalid_cost(lo) || is_invalid_cost(hi)) return kInvalidCost;
  return frac * hi + (1.0 - frac) * lo;
}

Tensor3<double> lookup(const CostVolume& volume, const DisparityMap& disp, int radius) {
  if (disp.width() != volume.width() || disp.height() != volume.height())
    throw ConfigError("lookup: disparity shape does not match the cost volume");
  if (radius < 0) throw ConfigError("lookup: radius must be >= 0");
  const int w = volume.width();
  const int h = volume.height();
  const int taps = 2 * radius + 1;
  Tensor3<double> slab(w, h, taps);
  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      const auto column = volume.column(u, v);
      const double center = disp(u, v);
      for (int k = 0; k < taps; ++k) slab(u, v, k) = sample_column(column, center + (k - radius));
    }
  });
  return slab;
}

void write_cost_curve_csv(const std::filesystem::path& path, const CostVolume& volume, int u, int v) {
  if (u < 0 || v < 0 || u >= volume.width() || v >= volume.height())
    throw ConfigError("write_cost_curve_csv: pixel outside the volume");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "d,cost\n" << std::setprecision(9);
  const auto column = volume.column(u, v);
  for (int d = 0; d < volume.depth(); ++d) out << d << ',' << column[d] << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace tstereo
