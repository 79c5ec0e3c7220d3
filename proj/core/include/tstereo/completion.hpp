#pragma once

#include "tstereo/features.hpp"
#include "tstereo/image.hpp"

namespace tstereo {

struct CompletionConfig {
  int state_channels = 16;       ///< F; must be >= 3
  double disparity_scale = 64.0; ///< divisor used to normalize disparity channels
  double distance_clamp = 16.0;  ///< px; distance-to-valid saturates here
};

/// Dense initialization plus the state features handed to fusion.
struct CompletionOutput {
  DisparityMap dense;
  HiddenState state;  ///< fully valid, F channels
};

/// Pull-push hole filling. Validity-weighted 2x2 averaging builds coarser
/// levels until one is fully dense; filling then walks back down, giving each
/// hole the bilinear interpolation of the already-filled coarser level. Valid
/// pixels are returned verbatim. Throws EmptyHintError if nothing is valid.
DisparityMap pull_push_fill(const SemiDenseDisparity& semi);

/// Exact Euclidean distance (px) from each pixel to the nearest valid pixel.
Image<double> distance_to_valid(const Mask& valid);

/// Densifies a semi-dense map and assembles F state channels:
///   0: completed disparity / disparity_scale
///   1: min(distance to valid, clamp) / clamp
///   2: 3x3 disparity range / disparity_scale
///   3..F-1: zero
/// `context` is accepted for interface compatibility with learned completion
/// modules; this implementation does not read it.
CompletionOutput complete(const SemiDenseDisparity& semi, const FeatureMap& context,
                          const CompletionConfig& cfg = {});

}  // namespace tstereo
