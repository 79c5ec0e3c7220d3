#include "tstereo/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tstereo/error.hpp"
#include "tstereo/parallel.hpp"

namespace tstereo {

namespace {

long cross(PixelOffset a, PixelOffset b) {
  return static_cast<long>(b.du) * a.dv - static_cast<long>(a.du) * b.dv;
}

double median_inplace(std::span<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

std::vector<OffsetPair> default_gradient_pairs() {
  return {{{1, 0}, {0, 1}}, {{-1, 0}, {0, -1}}, {{1, 1}, {1, -1}}, {{-1, 1}, {-1, -1}}};
}

std::vector<PixelOffset> square_neighborhood(int radius) {
  std::vector<PixelOffset> out;
  for (int dv = -radius; dv <= radius; ++dv)
    for (int du = -radius; du <= radius; ++du) out.push_back({du, dv});
  return out;
}

void RefinementConfig::validate() const {
  if (iterations < 0) throw ConfigError("refinement: iterations must be >= 0");
  if (lookup_radius < 1) throw ConfigError("refinement: lookup radius must be >= 1");
  if (gradient_pairs.empty()) throw ConfigError("refinement: at least one gradient offset pair is required");
  for (const auto& p : gradient_pairs)
    if (cross(p.first, p.second) == 0)
      throw ConfigError("refinement: gradient offsets (" + std::to_string(p.first.du) + "," +
                        std::to_string(p.first.dv) + ") and (" + std::to_string(p.second.du) + "," +
                        std::to_string(p.second.dv) + ") are collinear");
  if (std::find(neighborhood.begin(), neighborhood.end(), PixelOffset{0, 0}) == neighborhood.end())
    throw ConfigError("refinement: propagation neighborhood must contain (0,0)");
  if (!(beta >= 0.0)) throw ConfigError("refinement: beta must be >= 0");
  if (!(max_step > 0.0)) throw ConfigError("refinement: max_step must be positive");
  if (!(gradient_clamp > 0.0)) throw ConfigError("refinement: gradient clamp must be positive");
  if (!(state_blend >= 0.0 && state_blend <= 1.0)) throw ConfigError("refinement: state_blend must lie in [0, 1]");
  if (!(disparity_scale > 0.0)) throw ConfigError("refinement: disparity_scale must be positive");
}

PlaneGradient plane_gradient(PixelOffset x1, double dd1, PixelOffset x2, double dd2) {
  const double det = static_cast<double>(cross(x1, x2));
  if (det == 0.0) throw DomainError("plane_gradient: offsets are collinear");
  return {(x1.dv * dd2 - x2.dv * dd1) / det, (x2.du * dd1 - x1.du * dd2) / det};
}

double slab_step(std::span<const double> slab, double max_step) {
  const int taps = static_cast<int>(slab.size());
  const int radius = taps / 2;
  if (is_invalid_cost(slab[radius])) return 0.0;

  const auto [lo_it, hi_it] = std::minmax_element(slab.begin(), slab.end());
  if (*hi_it - *lo_it <= 1e-12) return 0.0;

  // Maximum; ties resolved toward the center, then toward the smaller offset.
  int best = radius;
  for (int k = 0; k < taps; ++k) {
    if (slab[k] > slab[best] || (slab[k] == slab[best] && std::abs(k - radius) < std::abs(best - radius)))
      best = k;
  }
  if (is_invalid_cost(slab[best])) return 0.0;

  double step = best - radius;
  if (best > 0 && best < taps - 1 && !is_invalid_cost(slab[best - 1]) && !is_invalid_cost(slab[best + 1])) {
    const double left = slab[best - 1];
    const double right = slab[best + 1];
    const double curvature = left - 2.0 * slab[best] + right;
    if (curvature < 0.0) step += std::clamp(0.5 * (left - right) / curvature, -0.5, 0.5);
  }
  return std::clamp(step, -max_step, max_step);
}

DisparityStep refine_disparity_step(const DisparityMap& d, const HiddenState& h, const Tensor3<double>& slab,
                                    const RefinementConfig& cfg) {
  const int w = d.width();
  const int ht = d.height();
  if (slab.width() != w || slab.height() != ht) throw ConfigError("refine_disparity_step: slab shape mismatch");
  if (h.width() != w || h.height() != ht) throw ConfigError("refine_disparity_step: hidden state shape mismatch");

  DisparityStep out{DisparityMap(w, ht), h, DisparityMap(w, ht)};
  const int f = h.feature_count();
  const int stats = std::min(f, 4);
  const double alpha = cfg.state_blend;
  parallel_rows(ht, [&](int v) {
    for (int u = 0; u < w; ++u) {
      const auto column = slab.pixel(u, v);
      const double step = slab_step(column, cfg.max_step);
      out.step(u, v) = step;
      out.disparity(u, v) = std::max(d(u, v) + step, 0.0);

      double hi = kInvalidCost;
      double lo = 1.0;
      double sum = 0.0;
      int count = 0;
      for (double c : column) {
        if (is_invalid_cost(c)) continue;
        hi = std::max(hi, c);
        lo = std::min(lo, c);
        sum += c;
        ++count;
      }
      const double s[4] = {hi, count > 0 ? sum / count : kInvalidCost, count > 0 ? hi - lo : 0.0,
                           step / cfg.max_step};
      auto state = out.hidden.channels.pixel(u, v);
      for (int i = 0; i < stats; ++i) {
        double& x = state[f - stats + i];
        x = (1.0 - alpha) * x + alpha * s[i];
      }
      out.hidden.valid(u, v) = 1;
    }
  });
  return out;
}

std::vector<GradientSample> sample_gradients(const DisparityMap& d, std::span<const OffsetPair> pairs) {
  for (const auto& p : pairs)
    if (cross(p.first, p.second) == 0) throw ConfigError("sample_gradients: collinear offset pair");
  const int w = d.width();
  const int h = d.height();
  std::vector<GradientSample> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    GradientSample s{{Image<double>(w, h, 0.0), Image<double>(w, h, 0.0)}, Mask(w, h, 0)};
    parallel_rows(h, [&](int v) {
      for (int u = 0; u < w; ++u) {
        const int u1 = std::clamp(u + pair.first.du, 0, w - 1);
        const int v1 = std::clamp(v + pair.first.dv, 0, h - 1);
        const int u2 = std::clamp(u + pair.second.du, 0, w - 1);
        const int v2 = std::clamp(v + pair.second.dv, 0, h - 1);
        const PixelOffset x1{u1 - u, v1 - v};
        const PixelOffset x2{u2 - u, v2 - v};
        if (cross(x1, x2) == 0) continue;
        const PlaneGradient g = plane_gradient(x1, d(u1, v1) - d(u, v), x2, d(u2, v2) - d(u, v));
        s.field.du(u, v) = g.du;
        s.field.dv(u, v) = g.dv;
        s.valid(u, v) = 1;
      }
    });
    out.push_back(std::move(s));
  }
  return out;
}

GradientField refine_gradients(std::span<const GradientSample> samples, const FeatureMap& context, double clamp) {
  if (samples.empty()) throw ConfigError("refine_gradients: needs at least one sample");
  const int w = samples.front().field.du.width();
  const int h = samples.front().field.du.height();
  if (context.width() != w || context.height() != h) throw ConfigError("refine_gradients: context shape mismatch");

  GradientField median{Image<double>(w, h, 0.0), Image<double>(w, h, 0.0)};
  parallel_rows(h, [&](int v) {
    std::vector<double> du;
    std::vector<double> dv;
    for (int u = 0; u < w; ++u) {
      du.clear();
      dv.clear();
      for (const auto& s : samples) {
        if (!s.valid(u, v)) continue;
        du.push_back(s.field.du(u, v));
        dv.push_back(s.field.dv(u, v));
      }
      if (du.empty()) continue;
      median.du(u, v) = median_inplace(du);
      median.dv(u, v) = median_inplace(dv);
    }
  });

  Image<double> norm(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      double s = 0.0;
      for (double x : context.channels.pixel(u, v)) s += x * x;
      norm(u, v) = std::sqrt(s);
    }

  GradientField out{Image<double>(w, h), Image<double>(w, h)};
  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      const auto center = context.channels.pixel(u, v);
      double wsum = 0.0;
      double su = 0.0;
      double sv = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = u + dx;
          const int y = v + dy;
          if (!median.du.contains(x, y)) continue;
          double weight = 1.0;
          if (dx != 0 || dy != 0) {
            const auto other = context.channels.pixel(x, y);
            double dot = 0.0;
            for (std::size_t c = 0; c < center.size(); ++c) dot += center[c] * other[c];
            const double denom = norm(u, v) * norm(x, y);
            weight = denom > 0.0 ? std::max(0.0, dot / denom) : 0.0;
          }
          wsum += weight;
          su += weight * median.du(x, y);
          sv += weight * median.dv(x, y);
        }
      }
      out.du(u, v) = std::clamp(su / wsum, -clamp, clamp);
      out.dv(u, v) = std::clamp(sv / wsum, -clamp, clamp);
    }
  });
  return out;
}

Tensor3<double> propagate(const DisparityMap& d, const GradientField& g, std::span<const PixelOffset> neighborhood) {
  const int w = d.width();
  const int h = d.height();
  if (!g.du.same_shape(d) || !g.dv.same_shape(d)) throw ConfigError("propagate: gradient shape mismatch");
  if (neighborhood.empty()) throw ConfigError("propagate: empty neighborhood");
  const int k_count = static_cast<int>(neighborhood.size());
  Tensor3<double> out(w, h, k_count);
  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      for (int k = 0; k < k_count; ++k) {
        const int un = std::clamp(u + neighborhood[k].du, 0, w - 1);
        const int vn = std::clamp(v + neighborhood[k].dv, 0, h - 1);
        out(u, v, k) = d(un, vn) + (u - un) * g.du(un, vn) + (v - vn) * g.dv(un, vn);
      }
    }
  });
  return out;
}

DisparityMap weighted_fusion(const Tensor3<double>& candidates, const CostVolume& volume, const HiddenState& /*hidden*/,
                             double beta) {
  const int w = candidates.width();
  const int h = candidates.height();
  if (volume.width() != w || volume.height() != h) throw ConfigError("weighted_fusion: cost volume shape mismatch");
  const int k_count = candidates.channels();
  DisparityMap out(w, h);
  parallel_rows(h, [&](int v) {
    std::vector<double> logits(static_cast<std::size_t>(k_count));
    for (int u = 0; u < w; ++u) {
      const auto cand = candidates.pixel(u, v);
      const auto column = volume.column(u, v);
      double top = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < k_count; ++k) {
        logits[k] = beta * sample_column(column, cand[k]);
        top = std::max(top, logits[k]);
      }
      double z = 0.0;
      double acc = 0.0;
      for (int k = 0; k < k_count; ++k) {
        const double e = std::exp(logits[k] - top);
        z += e;
        acc += e * cand[k];
      }
      out(u, v) = acc / z;
    }
  });
  return out;
}

RefinementResult iterate(const DisparityMap& d0, const HiddenState& h0, const CostVolume& volume,
                         const FeatureMap& context, const RefinementConfig& cfg,
                         const FusionWeights& update_weights) {
  cfg.validate();
  RefinementResult result{d0, h0, {}};
  const int w = d0.width();
  const int h = d0.height();
  for (int i = 0; i < cfg.iterations; ++i) {
    const Tensor3<double> slab = lookup(volume, result.disparity, cfg.lookup_radius);
    DisparityStep dsr = refine_disparity_step(result.disparity, result.hidden, slab, cfg);

    const auto samples = sample_gradients(dsr.disparity, cfg.gradient_pairs);
    GradientField g = refine_gradients(samples, context, cfg.gradient_clamp);
    const Tensor3<double> candidates = propagate(dsr.disparity, g, cfg.neighborhood);
    DisparityMap gdp = weighted_fusion(candidates, volume, dsr.hidden, cfg.beta);
    for (double& x : gdp.pixels()) x = std::max(x, 0.0);

    // Hidden-state update driven by the refined disparity.
    HiddenState encoded = dsr.hidden;
    if (encoded.feature_count() >= 2) {
      for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
          auto s = encoded.channels.pixel(u, v);
          s[0] = gdp(u, v) / cfg.disparity_scale;
          s[1] = (gdp(u, v) - dsr.disparity(u, v)) / cfg.max_step;
        }
    }
    result.hidden = fuse_state(encoded, dsr.hidden, update_weights);

    double step_sum = 0.0;
    for (int v = 0; v < h; ++v) {
      double row = 0.0;
      for (double s : dsr.step.row(v)) row += std::abs(s);
      step_sum += row;
    }

    result.disparity = gdp;
    const double mean_abs_step = step_sum / static_cast<double>(dsr.step.size());
    result.iterations.push_back({std::move(dsr.disparity), std::move(dsr.step), std::move(g), std::move(gdp),
                                 mean_abs_step});
  }
  return result;
}

}  // namespace tstereo
