#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tstereo/image.hpp"

namespace tstereo {

/// Parameters of the per-pixel (1x1 convolution) gate used for temporal state
/// fusion and for the hidden-state update inside refinement. Each matrix maps
/// 2F inputs to F outputs and is stored row-major.
struct FusionWeights {
  int feature_count = 0;
  std::vector<double> w_z, w_r, w_q;
  std::vector<double> b_z, b_r, b_q;

  /// All-zero parameters for F features.
  static FusionWeights zeros(int feature_count);
  /// Gaussian N(0, sigma^2) entries from a seeded mt19937_64; biases included.
  static FusionWeights random(int feature_count, std::uint64_t seed, double sigma = 0.1);

  /// Throws ConfigError when vector sizes disagree with F or values are non-finite.
  void validate() const;

  friend bool operator==(const FusionWeights&, const FusionWeights&) = default;
};

/// Gate activations for one pixel.
struct GateValues {
  std::vector<double> z, r, q, h;
};

/// z = sigmoid(Wz [c, h]), r = sigmoid(Wr [c, h]), q = tanh(Wq [r*c, h]),
/// out = z*c + (1 - z)*q.
GateValues fuse_pixel(std::span<const double> c, std::span<const double> h_prev, const FusionWeights& w);

/// Applies fuse_pixel everywhere. Pixels where h_prev is invalid use a zero
/// vector. `c` must be fully valid; the result is fully valid. A default
/// constructed (zero-channel) h_prev counts as entirely invalid.
HiddenState fuse_state(const HiddenState& c, const HiddenState& h_prev, const FusionWeights& w);

}  // namespace tstereo
