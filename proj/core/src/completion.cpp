#include "tstereo/completion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tstereo/error.hpp"
#include "tstereo/parallel.hpp"

namespace tstereo {

namespace {

struct Level {
  Image<double> value;
  Mask valid;
};

bool fully_valid(const Mask& m) {
  return std::all_of(m.pixels().begin(), m.pixels().end(), [](auto x) { return x != 0; });
}

Level pull(const Level& fine) {
  const int w = (fine.value.width() + 1) / 2;
  const int h = (fine.value.height() + 1) / 2;
  Level coarse{Image<double>(w, h, 0.0), Mask(w, h, 0)};
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double sum = 0.0;
      int count = 0;
      for (int y = 2 * v; y < std::min(2 * v + 2, fine.value.height()); ++y)
        for (int x = 2 * u; x < std::min(2 * u + 2, fine.value.width()); ++x)
          if (fine.valid(x, y)) {
            sum += fine.value(x, y);
            ++count;
          }
      if (count > 0) {
        coarse.value(u, v) = sum / count;
        coarse.valid(u, v) = 1;
      }
    }
  }
  return coarse;
}

double bilinear_clamped(const Image<double>& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  return (1.0 - fy) * ((1.0 - fx) * img(x0, y0) + fx * img(x1, y0)) +
         fy * ((1.0 - fx) * img(x0, y1) + fx * img(x1, y1));
}

void push(Level& fine, const Image<double>& coarse_filled) {
  const int w = fine.value.width();
  parallel_rows(fine.value.height(), [&](int v) {
    for (int u = 0; u < w; ++u) {
      if (fine.valid(u, v)) continue;
      fine.value(u, v) = bilinear_clamped(coarse_filled, (u + 0.5) / 2.0 - 0.5, (v + 0.5) / 2.0 - 0.5);
    }
  });
}

// Squared 1D distance transform of a sampled function (lower envelope of
// parabolas). Infinite samples contribute nothing.
void distance_1d(std::span<const double> f, std::span<double> out, std::vector<int>& hull,
                 std::vector<double>& breaks) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  hull.assign(n, 0);
  breaks.assign(n + 1, 0.0);

  int first = 0;
  while (first < n && !std::isfinite(f[first])) ++first;
  if (first == n) {
    std::fill(out.begin(), out.end(), inf);
    return;
  }

  auto intersect = [&](int p, int q) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
  };
  int k = 0;
  hull[0] = first;
  breaks[0] = -inf;
  breaks[1] = inf;
  for (int q = first + 1; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    double s = intersect(hull[k], q);
    while (s <= breaks[k]) {
      --k;
      s = intersect(hull[k], q);
    }
    ++k;
    hull[k] = q;
    breaks[k] = s;
    breaks[k + 1] = inf;
  }

  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (breaks[j + 1] < q) ++j;
    const double diff = q - hull[j];
    out[q] = diff * diff + f[hull[j]];
  }
}

}  // namespace

DisparityMap pull_push_fill(const SemiDenseDisparity& semi) {
  if (!semi.values.same_shape(semi.valid)) throw ConfigError("completion: mask shape mismatch");
  if (semi.valid_count() == 0) throw EmptyHintError("completion: semi-dense hint has no valid pixel");

  std::vector<Level> levels;
  levels.push_back({semi.values, semi.valid});
  for (std::size_t i = 0; i < levels[0].value.size(); ++i)
    if (!levels[0].valid.pixels()[i]) levels[0].value.pixels()[i] = 0.0;
  while (!fully_valid(levels.back().valid)) levels.push_back(pull(levels.back()));

  for (std::size_t i = levels.size() - 1; i-- > 0;) push(levels[i], levels[i + 1].value);
  return std::move(levels.front().value);
}

Image<double> distance_to_valid(const Mask& valid) {
  const int w = valid.width();
  const int h = valid.height();
  constexpr double inf = std::numeric_limits<double>::infinity();
  Image<double> sq(w, h, inf);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (valid(u, v)) sq(u, v) = 0.0;

  std::vector<int> hull;
  std::vector<double> breaks;
  std::vector<double> in(static_cast<std::size_t>(std::max(w, h)));
  std::vector<double> out(in.size());
  for (int u = 0; u < w; ++u) {
    for (int v = 0; v < h; ++v) in[v] = sq(u, v);
    distance_1d({in.data(), static_cast<std::size_t>(h)}, {out.data(), static_cast<std::size_t>(h)}, hull, breaks);
    for (int v = 0; v < h; ++v) sq(u, v) = out[v];
  }
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) in[u] = sq(u, v);
    distance_1d({in.data(), static_cast<std::size_t>(w)}, {out.data(), static_cast<std::size_t>(w)}, hull, breaks);
    for (int u = 0; u < w; ++u) sq(u, v) = std::sqrt(out[u]);
  }
  return sq;
}

CompletionOutput complete(const SemiDenseDisparity& semi, const FeatureMap& /*context*/,
                          const CompletionConfig& cfg) {
  if (cfg.state_channels < 3) throw ConfigError("completion: state_channels must be >= 3");
  if (!(cfg.disparity_scale > 0.0) || !(cfg.distance_clamp > 0.0))
    throw ConfigError("completion: scales must be positive");

  CompletionOutput out;
  out.dense = pull_push_fill(semi);
  const int w = out.dense.width();
  const int h = out.dense.height();
  const Image<double> distance = distance_to_valid(semi.valid);

  out.state = HiddenState(w, h, cfg.state_channels);
  out.state.valid.fill(1);
  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      double lo = out.dense(u, v);
      double hi = lo;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const double x = out.dense.clamped(u + dx, v + dy);
          lo = std::min(lo, x);
          hi = std::max(hi, x);
        }
      auto s = out.state.channels.pixel(u, v);
      s[0] = out.dense(u, v) / cfg.disparity_scale;
      s[1] = std::min(distance(u, v), cfg.distance_clamp) / cfg.distance_clamp;
      s[2] = (hi - lo) / cfg.disparity_scale;
    }
  });
  return out;
}

}  // namespace tstereo
