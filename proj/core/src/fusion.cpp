#include "tstereo/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tstereo/error.hpp"
#include "tstereo/parallel.hpp"

namespace tstereo {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// out[i] = b[i] + sum_j W[i, j] * x[j] with W of shape F x 2F.
void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x, std::span<double> out) {
  const std::size_t cols = x.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = b[i];
    const double* row = w.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
}

}  // namespace

FusionWeights FusionWeights::zeros(int feature_count) {
  if (feature_count < 1) throw ConfigError("fusion: feature count must be >= 1");
  const auto f = static_cast<std::size_t>(feature_count);
  FusionWeights w;
  w.feature_count = feature_count;
  w.w_z.assign(f * 2 * f, 0.0);
  w.w_r = w.w_z;
  w.w_q = w.w_z;
  w.b_z.assign(f, 0.0);
  w.b_r = w.b_z;
  w.b_q = w.b_z;
  return w;
}

FusionWeights FusionWeights::random(int feature_count, std::uint64_t seed, double sigma) {
  FusionWeights w = zeros(feature_count);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto* v : {&w.w_z, &w.w_r, &w.w_q, &w.b_z, &w.b_r, &w.b_q})
    for (double& x : *v) x = normal(rng);
  return w;
}

void FusionWeights::validate() const {
  if (feature_count < 1) throw ConfigError("fusion: feature count must be >= 1");
  const auto f = static_cast<std::size_t>(feature_count);
  for (const auto* m : {&w_z, &w_r, &w_q})
    if (m->size() != f * 2 * f) throw ConfigError("fusion: weight matrix size does not match F");
  for (const auto* b : {&b_z, &b_r, &b_q})
    if (b->size() != f) throw ConfigError("fusion: bias size does not match F");
  for (const auto* v : {&w_z, &w_r, &w_q, &b_z, &b_r, &b_q})
    for (double x : *v)
      if (!std::isfinite(x)) throw ConfigError("fusion: non-finite parameter");
}

GateValues fuse_pixel(std::span<const double> c, std::span<const double> h_prev, const FusionWeights& w) {
  const auto f = static_cast<std::size_t>(w.feature_count);
  if (c.size() != f || h_prev.size() != f) throw ConfigError("fusion: channel count does not match weights");

  std::vector<double> x(2 * f);
  std::copy(c.begin(), c.end(), x.begin());
  std::copy(h_prev.begin(), h_prev.end(), x.begin() + static_cast<std::ptrdiff_t>(f));

  GateValues g{std::vector<double>(f), std::vector<double>(f), std::vector<double>(f), std::vector<double>(f)};
  affine(w.w_z, w.b_z, x, g.z);
  affine(w.w_r, w.b_r, x, g.r);
  for (std::size_t i = 0; i < f; ++i) {
    g.z[i] = sigmoid(g.z[i]);
    g.r[i] = sigmoid(g.r[i]);
    x[i] = g.r[i] * c[i];
  }
  affine(w.w_q, w.b_q, x, g.q);
  for (std::size_t i = 0; i < f; ++i) {
    g.q[i] = std::tanh(g.q[i]);
    g.h[i] = g.z[i] * c[i] + (1.0 - g.z[i]) * g.q[i];
  }
  return g;
}

HiddenState fuse_state(const HiddenState& c, const HiddenState& h_prev, const FusionWeights& w) {
  w.validate();
  const int f = w.feature_count;
  if (c.feature_count() != f) throw ConfigError("fusion: current state channel count does not match weights");
  const bool has_prev = h_prev.feature_count() > 0;
  if (has_prev && (h_prev.feature_count() != f || h_prev.width() != c.width() || h_prev.height() != c.height()))
    throw ConfigError("fusion: previous hidden state shape mismatch");

  HiddenState out(c.width(), c.height(), f);
  out.valid.fill(1);
  const std::vector<double> zero(static_cast<std::size_t>(f), 0.0);
  parallel_rows(c.height(), [&](int v) {
    for (int u = 0; u < c.width(); ++u) {
      const std::span<const double> prev =
          has_prev && h_prev.valid(u, v) ? h_prev.channels.pixel(u, v) : std::span<const double>(zero);
      const GateValues g = fuse_pixel(c.channels.pixel(u, v), prev, w);
      std::copy(g.h.begin(), g.h.end(), out.channels.pixel(u, v).begin());
    }
  });
  return out;
}

}  // namespace tstereo
