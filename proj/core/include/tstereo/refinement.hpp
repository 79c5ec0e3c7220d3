#pragma once

#include <span>
#include <vector>

#include "tstereo/cost_volume.hpp"
#include "tstereo/features.hpp"
#include "tstereo/fusion.hpp"
#include "tstereo/image.hpp"

namespace tstereo {

struct PixelOffset {
  int du = 0;
  int dv = 0;
  friend bool operator==(const PixelOffset&, const PixelOffset&) = default;
};

/// Two neighbors spanning a local plane with the center pixel.
struct OffsetPair {
  PixelOffset first;
  PixelOffset second;
  friend bool operator==(const OffsetPair&, const OffsetPair&) = default;
};

/// Per-pixel disparity gradient (dd/du, dd/dv), px per px.
struct GradientField {
  Image<double> du;
  Image<double> dv;
};

/// One sampled gradient map; `valid` is cleared where border clamping made
/// the two sample vectors collinear.
struct GradientSample {
  GradientField field;
  Mask valid;
};

std::vector<OffsetPair> default_gradient_pairs();
/// All offsets of a (2r+1) x (2r+1) square, center included.
std::vector<PixelOffset> square_neighborhood(int radius);

struct RefinementConfig {
  int iterations = 5;
  int lookup_radius = 4;
  std::vector<OffsetPair> gradient_pairs = default_gradient_pairs();
  std::vector<PixelOffset> neighborhood = square_neighborhood(1);
  double beta = 10.0;           ///< softmax sharpness of candidate weighting
  double max_step = 2.0;        ///< px; clamp of the disparity-space update
  double gradient_clamp = 8.0;  ///< G_max
  double state_blend = 0.5;     ///< weight of slab statistics in the state update
  double disparity_scale = 64.0;

  /// Throws ConfigError on collinear pairs, a neighborhood without (0,0),
  /// negative iteration counts or non-positive scales.
  void validate() const;
};

struct PlaneGradient {
  double du = 0.0;
  double dv = 0.0;
};

/// Plane gradient through the origin sample and two offsets with disparity
/// differences dd1, dd2. Throws DomainError when the offsets are collinear.
PlaneGradient plane_gradient(PixelOffset x1, double dd1, PixelOffset x2, double dd2);

/// Disparity-space update for one pixel from its cost slab: the offset of the
/// slab maximum plus a parabolic sub-sample correction, clamped to
/// [-max_step, max_step]. Flat slabs and slabs whose center or maximum is
/// invalid return 0. No parabola is fitted at the slab boundary.
double slab_step(std::span<const double> slab, double max_step);

struct DisparityStep {
  DisparityMap disparity;  ///< max(d + step, 0)
  HiddenState hidden;      ///< intermediate hidden state h'
  DisparityMap step;       ///< per-pixel update
};

/// Applies slab_step everywhere. The hidden state's last (up to) four
/// channels are blended toward the slab statistics (max, mean, max - min,
/// step / max_step); other channels pass through.
DisparityStep refine_disparity_step(const DisparityMap& d, const HiddenState& h, const Tensor3<double>& slab,
                                    const RefinementConfig& cfg);

/// Plane-fit gradients, one map per offset pair, using the clamped neighbor
/// positions. Throws ConfigError for collinear pairs.
std::vector<GradientSample> sample_gradients(const DisparityMap& d, std::span<const OffsetPair> pairs);

/// Per-component median over the valid samples, then one 3x3 pass of
/// averaging weighted by max(0, cosine similarity) of context descriptors,
/// then clamping each component to [-clamp, clamp].
GradientField refine_gradients(std::span<const GradientSample> samples, const FeatureMap& context, double clamp);

/// Candidate k at pixel p extrapolates neighbor n = clamp(p + offset_k) along
/// its plane: d(n) + (u_p - u_n) du(n) + (v_p - v_n) dv(n).
Tensor3<double> propagate(const DisparityMap& d, const GradientField& g, std::span<const PixelOffset> neighborhood);

/// Softmax over beta * C(candidate) (interpolated, clamped, invalid -> -1)
/// and weighted sum of the candidates. `hidden` is accepted for interface
/// compatibility with learned weight regressors and is not read.
DisparityMap weighted_fusion(const Tensor3<double>& candidates, const CostVolume& volume, const HiddenState& hidden,
                             double beta);

struct IterationRecord {
  DisparityMap d_dsr;   ///< after the disparity-space update
  DisparityMap step;    ///< disparity-space update per pixel
  GradientField g_gsr;  ///< refined gradient
  DisparityMap d_gdp;   ///< after propagation and weighted fusion
  double mean_abs_step = 0.0;
};

struct RefinementResult {
  DisparityMap disparity;
  HiddenState hidden;
  std::vector<IterationRecord> iterations;
};

/// Runs `cfg.iterations` rounds of: lookup -> disparity-space step ->
/// gradient sampling and refinement -> propagation -> weighted fusion ->
/// hidden-state update with `update_weights`.
RefinementResult iterate(const DisparityMap& d0, const HiddenState& h0, const CostVolume& volume,
                         const FeatureMap& context, const RefinementConfig& cfg,
                         const FusionWeights& update_weights);

}  // namespace tstereo
