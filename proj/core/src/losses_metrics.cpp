#include "tstereo/losses_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tstereo/error.hpp"

namespace tstereo {

namespace {

void require_same_shape(const DisparityMap& a, const DisparityMap& b, const Mask& m, const char* what) {
  if (!a.same_shape(b) || !a.same_shape(m)) throw ConfigError(std::string(what) + ": shape mismatch");
}

// Row-wise partial sums, then a fixed-order total: independent of threading.
template <typename Fn>
void accumulate_rows(int height, Fn&& per_row) {
  for (int v = 0; v < height; ++v) per_row(v);
}

double bilinear(const DisparityMap& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  return (1.0 - fy) * ((1.0 - fx) * img(x0, y0) + fx * img(x1, y0)) +
         fy * ((1.0 - fx) * img(x0, y1) + fx * img(x1, y1));
}

}  // namespace

void LossWeights::validate() const {
  if (!(eta >= 0.0)) throw ConfigError("loss weights: eta must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("loss weights: gamma must lie in (0, 1]");
  if (!(lambda_dc >= 0.0) || !(lambda_gdp >= 0.0)) throw ConfigError("loss weights: lambdas must be >= 0");
}

double psi(std::span<const double> column, double d) {
  const double last = static_cast<double>(column.size()) - 1.0;
  if (!(d >= 0.0 && d <= last)) throw DomainError("psi: disparity outside [0, D-1]");
  const double lo = std::floor(d);
  const auto i = static_cast<std::size_t>(lo);
  const double upper = i + 1 < column.size() ? column[i + 1] : 0.0;
  return (d - lo) * upper + (lo + 1.0 - d) * column[i];
}

std::optional<double> cost_volume_loss_pixel(std::span<const double> column, double gt, double eta) {
  const int depth = static_cast<int>(column.size());
  const int excl_lo = static_cast<int>(std::ceil(gt - 1.5));
  const int excl_hi = static_cast<int>(std::floor(gt + 1.5));
  int nm = -1;
  for (int d = 0; d < depth; ++d) {
    if (d >= excl_lo && d <= excl_hi) continue;
    if (nm < 0 || column[d] > column[nm]) nm = d;
  }
  if (nm < 0) return std::nullopt;
  const double p_gt = psi(column, gt);
  return 1.0 - p_gt + std::max(eta + column[nm] - p_gt, 0.0);
}

double cost_volume_loss(const CostVolume& volume, const DisparityMap& gt, const Mask& gt_valid, double eta) {
  if (gt.width() != volume.width() || gt.height() != volume.height() || !gt.same_shape(gt_valid))
    throw ConfigError("cost_volume_loss: shape mismatch");
  const double last = volume.depth() - 1.0;
  double total = 0.0;
  std::size_t count = 0;
  accumulate_rows(gt.height(), [&](int v) {
    double row = 0.0;
    for (int u = 0; u < gt.width(); ++u) {
      const double g = gt(u, v);
      if (!gt_valid(u, v) || !(g >= 0.0) || g > last) continue;
      const auto term = cost_volume_loss_pixel(volume.column(u, v), g, eta);
      if (!term) continue;
      row += *term;
      ++count;
    }
    total += row;
  });
  if (count == 0) throw UndefinedLossError("cost_volume_loss: no contributing pixel");
  return total / static_cast<double>(count);
}

double l1_loss(const DisparityMap& d, const DisparityMap& gt, const Mask& gt_valid) {
  require_same_shape(d, gt, gt_valid, "l1_loss");
  double total = 0.0;
  std::size_t count = 0;
  accumulate_rows(gt.height(), [&](int v) {
    double row = 0.0;
    for (int u = 0; u < gt.width(); ++u) {
      if (!gt_valid(u, v)) continue;
      row += std::abs(d(u, v) - gt(u, v));
      ++count;
    }
    total += row;
  });
  if (count == 0) throw UndefinedLossError("l1_loss: no valid ground-truth pixel");
  return total / static_cast<double>(count);
}

double combine_disparity_loss(double l_dc, std::span<const double> l_dsr, std::span<const double> l_gdp,
                              const LossWeights& weights) {
  if (l_dsr.size() != l_gdp.size()) throw ConfigError("disparity_loss: iteration counts differ");
  const std::size_t n = l_dsr.size();
  double sum = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double decay = std::pow(weights.gamma, static_cast<double>(n - i));
    sum += decay * (l_dsr[i - 1] + weights.lambda_gdp * l_gdp[i - 1]);
  }
  return weights.lambda_dc * l_dc + sum;
}

double disparity_loss(const DisparityMap& d_dc, std::span<const DisparityMap> d_dsr,
                      std::span<const DisparityMap> d_gdp, const DisparityMap& gt, const Mask& gt_valid,
                      const LossWeights& weights) {
  if (d_dsr.size() != d_gdp.size()) throw ConfigError("disparity_loss: iteration counts differ");
  std::vector<double> l_dsr;
  std::vector<double> l_gdp;
  for (std::size_t i = 0; i < d_dsr.size(); ++i) {
    l_dsr.push_back(l1_loss(d_dsr[i], gt, gt_valid));
    l_gdp.push_back(l1_loss(d_gdp[i], gt, gt_valid));
  }
  return combine_disparity_loss(l1_loss(d_dc, gt, gt_valid), l_dsr, l_gdp, weights);
}

ForwardGradient forward_gradient(const DisparityMap& d, const Mask& mask) {
  if (!d.same_shape(mask)) throw ConfigError("forward_gradient: shape mismatch");
  const int w = d.width();
  const int h = d.height();
  ForwardGradient out{{Image<double>(w, h, 0.0), Image<double>(w, h, 0.0)}, Mask(w, h, 0)};
  for (int v = 0; v + 1 < h; ++v)
    for (int u = 0; u + 1 < w; ++u) {
      if (!mask(u, v) || !mask(u + 1, v) || !mask(u, v + 1)) continue;
      out.field.du(u, v) = d(u + 1, v) - d(u, v);
      out.field.dv(u, v) = d(u, v + 1) - d(u, v);
      out.valid(u, v) = 1;
    }
  return out;
}

double gradient_loss(const GradientField& g_gsr, const DisparityMap& d_gdp, const DisparityMap& gt,
                     const Mask& gt_valid) {
  require_same_shape(d_gdp, gt, gt_valid, "gradient_loss");
  if (!g_gsr.du.same_shape(gt) || !g_gsr.dv.same_shape(gt)) throw ConfigError("gradient_loss: shape mismatch");
  const ForwardGradient g_gt = forward_gradient(gt, gt_valid);
  const Mask all(gt.width(), gt.height(), 1);
  const ForwardGradient g_gdp = forward_gradient(d_gdp, all);

  double sum_gsr = 0.0;
  double sum_gdp = 0.0;
  std::size_t count = 0;
  accumulate_rows(gt.height(), [&](int v) {
    double row_gsr = 0.0;
    double row_gdp = 0.0;
    for (int u = 0; u < gt.width(); ++u) {
      if (!g_gt.valid(u, v)) continue;
      const double tu = g_gt.field.du(u, v);
      const double tv = g_gt.field.dv(u, v);
      row_gsr += std::abs(g_gsr.du(u, v) - tu) + std::abs(g_gsr.dv(u, v) - tv);
      row_gdp += std::abs(g_gdp.field.du(u, v) - tu) + std::abs(g_gdp.field.dv(u, v) - tv);
      ++count;
    }
    sum_gsr += row_gsr;
    sum_gdp += row_gdp;
  });
  if (count == 0) throw UndefinedLossError("gradient_loss: no pixel with a valid ground-truth stencil");
  return sum_gsr / static_cast<double>(count) + sum_gdp / static_cast<double>(count);
}

std::string_view to_string(Region region) { return region == Region::all ? "ALL" : "OCC"; }

std::optional<AccuracyMetrics> accuracy_metrics(const DisparityMap& d, const DisparityMap& gt, const Mask& region) {
  require_same_shape(d, gt, region, "accuracy_metrics");
  double err_sum = 0.0;
  std::size_t n = 0, n1 = 0, n3 = 0, nd1 = 0;
  accumulate_rows(gt.height(), [&](int v) {
    double row = 0.0;
    for (int u = 0; u < gt.width(); ++u) {
      if (!region(u, v)) continue;
      const double e = std::abs(d(u, v) - gt(u, v));
      row += e;
      ++n;
      if (e > 1.0) ++n1;
      if (e > 3.0) ++n3;
      if (e > 3.0 && e > 0.05 * std::abs(gt(u, v))) ++nd1;
    }
    err_sum += row;
  });
  if (n == 0) return std::nullopt;
  const double pct = 100.0 / static_cast<double>(n);
  return AccuracyMetrics{n, err_sum / static_cast<double>(n), n1 * pct, n3 * pct, nd1 * pct};
}

std::optional<double> reexpress_disparity(double u, double v, double disparity, const Pose& next_to_current,
                                          const CameraModel& cam) {
  if (!(disparity > 0.0)) return std::nullopt;
  const Eigen::Vector3d p = next_to_current.apply(backproject(u, v, cam.baseline * cam.fx / disparity, cam));
  if (!(p.z() > 0.0)) return std::nullopt;
  return cam.baseline * cam.fx / p.z();
}

std::optional<TemporalMetrics> temporal_metrics(const DisparityMap& d_t, const DisparityMap& d_t1,
                                                const TemporalAlignment& alignment, const DisparityMap& gt_t,
                                                const DisparityMap& gt_t1, const Mask& region) {
  require_same_shape(d_t, d_t1, region, "temporal_metrics");
  require_same_shape(gt_t, gt_t1, region, "temporal_metrics");
  if (!alignment.flow_u.same_shape(region) || !alignment.flow_v.same_shape(region) ||
      !alignment.flow_valid.same_shape(region))
    throw ConfigError("temporal_metrics: flow shape mismatch");

  const int w = d_t.width();
  const int h = d_t.height();
  double dd_sum = 0.0;
  double de_sum = 0.0;
  std::size_t n = 0;
  accumulate_rows(h, [&](int v) {
    double row_dd = 0.0;
    double row_de = 0.0;
    for (int u = 0; u < w; ++u) {
      if (!region(u, v) || !alignment.flow_valid(u, v)) continue;
      const double x = u + alignment.flow_u(u, v);
      const double y = v + alignment.flow_v(u, v);
      if (!(x >= 0.0 && y >= 0.0 && x <= w - 1.0 && y <= h - 1.0)) continue;
      double sx = x;
      double sy = y;
      double d_sample = 0.0;
      double g_sample = 0.0;
      if (alignment.sampling == FlowSampling::nearest) {
        const int nu = static_cast<int>(std::floor(x + 0.5));
        const int nv = static_cast<int>(std::floor(y + 0.5));
        sx = nu;
        sy = nv;
        d_sample = d_t1(nu, nv);
        g_sample = gt_t1(nu, nv);
      } else {
        d_sample = bilinear(d_t1, x, y);
        g_sample = bilinear(gt_t1, x, y);
      }
      const auto d_next = reexpress_disparity(sx, sy, d_sample, alignment.next_to_current, alignment.camera);
      const auto g_next = reexpress_disparity(sx, sy, g_sample, alignment.next_to_current, alignment.camera);
      if (!d_next || !g_next) continue;
      const double e_now = std::abs(d_t(u, v) - gt_t(u, v));
      const double e_next = std::abs(*d_next - *g_next);
      row_dd += std::abs(*d_next - d_t(u, v));
      row_de += std::max(e_next - e_now, 0.0);
      ++n;
    }
    dd_sum += row_dd;
    de_sum += row_de;
  });
  if (n == 0) return std::nullopt;
  return TemporalMetrics{n, dd_sum / static_cast<double>(n), de_sum / static_cast<double>(n)};
}

}  // namespace tstereo
