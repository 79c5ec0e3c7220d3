#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace oracle {

WtaDecision wta(std::span<const double> column, double threshold) {
  std::vector<int> order(column.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return column[a] > column[b]; });
  const int best = order.front();
  if (column[best] <= -1.0) return {false, best};
  for (int k : order) {
    if (std::abs(k - best) <= 1) continue;
    return {column[best] - column[k] > threshold, best};
  }
  return {false, best};
}

double interpolate(std::span<const double> column, double d) {
  const int lo = static_cast<int>(std::floor(d));
  const double t = d - lo;
  if (t == 0.0) return column[lo];
  return (1.0 - t) * column[lo] + t * column[lo + 1];
}

std::optional<double> cost_volume_loss_pixel(std::span<const double> column, double gt, double eta) {
  std::optional<double> best;
  for (std::size_t d = 0; d < column.size(); ++d) {
    const double dd = static_cast<double>(d);
    if (dd >= gt - 1.5 && dd <= gt + 1.5) continue;
    if (!best || column[d] > *best) best = column[d];
  }
  if (!best) return std::nullopt;
  const double p = interpolate(column, gt);
  return 1.0 - p + std::max(eta + *best - p, 0.0);
}

double l1(const DisparityMap& d, const DisparityMap& gt, const Mask& valid) {
  double sum = 0.0;
  int n = 0;
  for (int v = 0; v < gt.height(); ++v)
    for (int u = 0; u < gt.width(); ++u)
      if (valid(u, v)) {
        sum += std::abs(d(u, v) - gt(u, v));
        ++n;
      }
  return sum / n;
}

double disparity_loss(const DisparityMap& d_dc, const std::vector<DisparityMap>& d_dsr,
                      const std::vector<DisparityMap>& d_gdp, const DisparityMap& gt, const Mask& valid,
                      double gamma, double lambda_dc, double lambda_gdp) {
  double total = lambda_dc * l1(d_dc, gt, valid);
  const int n = static_cast<int>(d_dsr.size());
  for (int i = 1; i <= n; ++i) {
    double decay = 1.0;
    for (int k = 0; k < n - i; ++k) decay *= gamma;
    total += decay * (l1(d_dsr[i - 1], gt, valid) + lambda_gdp * l1(d_gdp[i - 1], gt, valid));
  }
  return total;
}

double gradient_loss(const DisparityMap& g_du, const DisparityMap& g_dv, const DisparityMap& d_gdp,
                     const DisparityMap& gt, const Mask& valid) {
  double a = 0.0;
  double b = 0.0;
  int n = 0;
  for (int v = 0; v + 1 < gt.height(); ++v)
    for (int u = 0; u + 1 < gt.width(); ++u) {
      if (!(valid(u, v) && valid(u + 1, v) && valid(u, v + 1))) continue;
      const double gu = gt(u + 1, v) - gt(u, v);
      const double gv = gt(u, v + 1) - gt(u, v);
      a += std::abs(g_du(u, v) - gu) + std::abs(g_dv(u, v) - gv);
      b += std::abs((d_gdp(u + 1, v) - d_gdp(u, v)) - gu) + std::abs((d_gdp(u, v + 1) - d_gdp(u, v)) - gv);
      ++n;
    }
  return a / n + b / n;
}

namespace {

double sample_bilinear(const DisparityMap& m, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double ax = x - x0;
  const double ay = y - y0;
  auto at = [&](int xx, int yy) {
    return m(std::min(xx, m.width() - 1), std::min(yy, m.height() - 1));
  };
  return at(x0, y0) * (1 - ax) * (1 - ay) + at(x0 + 1, y0) * ax * (1 - ay) + at(x0, y0 + 1) * (1 - ax) * ay +
         at(x0 + 1, y0 + 1) * ax * ay;
}

std::optional<double> to_current(double x, double y, double d, const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                                 const tstereo::CameraModel& cam) {
  if (!(d > 0.0)) return std::nullopt;
  const double z = cam.baseline * cam.fx / d;
  const double px = (x - cam.cx) / cam.fx * z;
  const double py = (y - cam.cy) / cam.fy * z;
  const double zc = r(2, 0) * px + r(2, 1) * py + r(2, 2) * z + t(2);
  if (!(zc > 0.0)) return std::nullopt;
  return cam.baseline * cam.fx / zc;
}

}  // namespace

std::optional<TemporalValues> temporal(const DisparityMap& d_t, const DisparityMap& d_t1, const Image<double>& flow_u,
                                       const Image<double>& flow_v, const Mask& flow_valid,
                                       const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation,
                                       const tstereo::CameraModel& cam, const DisparityMap& gt_t,
                                       const DisparityMap& gt_t1, const Mask& region) {
  TemporalValues out;
  const int w = d_t.width();
  const int h = d_t.height();
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (!region(u, v) || !flow_valid(u, v)) continue;
      const double x = u + flow_u(u, v);
      const double y = v + flow_v(u, v);
      if (x < 0 || y < 0 || x > w - 1 || y > h - 1) continue;
      const auto dn = to_current(x, y, sample_bilinear(d_t1, x, y), rotation, translation, cam);
      const auto gn = to_current(x, y, sample_bilinear(gt_t1, x, y), rotation, translation, cam);
      if (!dn || !gn) continue;
      out.abs_dd += std::abs(*dn - d_t(u, v));
      out.relu_de += std::max(std::abs(*dn - *gn) - std::abs(d_t(u, v) - gt_t(u, v)), 0.0);
      ++out.n;
    }
  if (out.n == 0) return std::nullopt;
  out.abs_dd /= static_cast<double>(out.n);
  out.relu_de /= static_cast<double>(out.n);
  return out;
}

DisparityMap pull_push(const DisparityMap& values, const Mask& valid) {
  const int w = values.width();
  const int h = values.height();
  bool dense = true;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) dense = dense && valid(u, v);
  if (dense) return values;

  const int cw = (w + 1) / 2;
  const int ch = (h + 1) / 2;
  DisparityMap coarse(cw, ch, 0.0);
  Mask coarse_valid(cw, ch, 0);
  for (int v = 0; v < ch; ++v)
    for (int u = 0; u < cw; ++u) {
      double s = 0.0;
      int n = 0;
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const int x = 2 * u + dx;
          const int y = 2 * v + dy;
          if (x < w && y < h && valid(x, y)) {
            s += values(x, y);
            ++n;
          }
        }
      if (n > 0) {
        coarse(u, v) = s / n;
        coarse_valid(u, v) = 1;
      }
    }
  const DisparityMap filled = pull_push(coarse, coarse_valid);

  DisparityMap out = values;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      if (valid(u, v)) continue;
      const double x = std::clamp((u + 0.5) / 2.0 - 0.5, 0.0, cw - 1.0);
      const double y = std::clamp((v + 0.5) / 2.0 - 0.5, 0.0, ch - 1.0);
      out(u, v) = sample_bilinear(filled, x, y);
    }
  return out;
}

tstereo::GradientField refine_gradients(const std::vector<tstereo::GradientSample>& samples,
                                        const tstereo::Tensor3<double>& context, double clamp) {
  const int w = context.width();
  const int h = context.height();
  auto median = [](std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2.0;
  };
  DisparityMap mu(w, h);
  DisparityMap mv(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      std::vector<double> a;
      std::vector<double> b;
      for (const auto& s : samples)
        if (s.valid(u, v)) {
          a.push_back(s.field.du(u, v));
          b.push_back(s.field.dv(u, v));
        }
      mu(u, v) = median(a);
      mv(u, v) = median(b);
    }
  auto cosine = [&](int u0, int v0, int u1, int v1) {
    double dot = 0.0;
    double n0 = 0.0;
    double n1 = 0.0;
    for (int c = 0; c < context.channels(); ++c) {
      dot += context(u0, v0, c) * context(u1, v1, c);
      n0 += context(u0, v0, c) * context(u0, v0, c);
      n1 += context(u1, v1, c) * context(u1, v1, c);
    }
    if (n0 == 0.0 || n1 == 0.0) return 0.0;
    return dot / (std::sqrt(n0) * std::sqrt(n1));
  };
  tstereo::GradientField out{DisparityMap(w, h), DisparityMap(w, h)};
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double ws = 0.0;
      double su = 0.0;
      double sv = 0.0;
      for (int y = v - 1; y <= v + 1; ++y)
        for (int x = u - 1; x <= u + 1; ++x) {
          if (x < 0 || y < 0 || x >= w || y >= h) continue;
          const double wt = (x == u && y == v) ? 1.0 : std::max(0.0, cosine(u, v, x, y));
          ws += wt;
          su += wt * mu(x, y);
          sv += wt * mv(x, y);
        }
      out.du(u, v) = std::clamp(su / ws, -clamp, clamp);
      out.dv(u, v) = std::clamp(sv / ws, -clamp, clamp);
    }
  return out;
}

namespace {

// Nearest positive ray parameter; the camera-frame direction has z = 1, so
// the parameter equals the camera depth.
std::optional<double> nearest_hit(const std::vector<InfinitePlane>& planes, const Eigen::Vector3d& origin,
                                  const Eigen::Vector3d& dir) {
  std::optional<double> best;
  for (const auto& p : planes) {
    const Eigen::Vector3d n = p.normal.normalized();
    const double denom = n.dot(dir);
    if (denom == 0.0) continue;
    const double lambda = (p.offset - n.dot(origin)) / denom;
    if (!(lambda > 0.0)) continue;
    if (p.clip.dot(origin + lambda * dir) > p.clip_max) continue;
    if (!best || lambda < *best) best = lambda;
  }
  return best;
}

}  // namespace

int temporal_occlusion_count(const std::vector<InfinitePlane>& planes, const tstereo::CameraModel& cam,
                             const tstereo::Pose& current, const tstereo::Pose& next, double tolerance) {
  int count = 0;
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u) {
      const Eigen::Vector3d dir_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
      const auto depth = nearest_hit(planes, current.translation(), current.rotation() * dir_cam);
      if (!depth) continue;
      const Eigen::Vector3d world = current.translation() + *depth * (current.rotation() * dir_cam);
      const Eigen::Vector3d in_next = next.rotation().transpose() * (world - next.translation());
      if (in_next.z() <= 0.0) {
        ++count;
        continue;
      }
      const double un = cam.fx * in_next.x() / in_next.z() + cam.cx;
      const double vn = cam.fy * in_next.y() / in_next.z() + cam.cy;
      const Eigen::Vector3d dir_next((un - cam.cx) / cam.fx, (vn - cam.cy) / cam.fy, 1.0);
      const auto seen = nearest_hit(planes, next.translation(), next.rotation() * dir_next);
      if (seen && *seen < in_next.z() - tolerance) ++count;
    }
  return count;
}

}  // namespace oracle
