#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "tstereo/features.hpp"
#include "tstereo/image.hpp"

namespace tstereo {

/// Similarity assigned to hypotheses whose right-image sample falls outside
/// the image (u - d < 0). It is the minimum of the cosine range, so it never
/// wins an argmax against an in-range sample.
inline constexpr double kInvalidCost = -1.0;

inline bool is_invalid_cost(double c) noexcept { return c <= kInvalidCost; }

/// H x W x D cosine-similarity grid; the D hypotheses of a pixel are contiguous.
class CostVolume {
 public:
  CostVolume() = default;
  CostVolume(int width, int height, int depth, double fill = kInvalidCost)
      : values_(width, height, depth, fill) {}

  int width() const noexcept { return values_.width(); }
  int height() const noexcept { return values_.height(); }
  int depth() const noexcept { return values_.channels(); }

  double& at(int u, int v, int d) noexcept { return values_(u, v, d); }
  double at(int u, int v, int d) const noexcept { return values_(u, v, d); }

  std::span<double> column(int u, int v) noexcept { return values_.pixel(u, v); }
  std::span<const double> column(int u, int v) const noexcept { return values_.pixel(u, v); }

  const Tensor3<double>& values() const noexcept { return values_; }

 private:
  Tensor3<double> values_;
};

/// C(v,u,d) = <Fl(v,u), Fr(v,u-d)> / (|Fl| |Fr|) for u-d >= 0, kInvalidCost
/// otherwise. A zero-norm descriptor yields similarity 0. Throws ConfigError on
/// shape or kind mismatch or when D is outside [1, W].
CostVolume build_cost_volume(const FeatureMap& left, const FeatureMap& right, int max_disparity);

/// Winner-take-all with a uniqueness margin.
///
/// d1 = argmax C, d2 = argmax over all hypotheses except d1-1, d1, d1+1; the
/// pixel keeps d1 iff C(d1) - C(d2) > threshold. Ties go to the smaller index.
/// Pixels whose best hypothesis is invalid stay invalid. Throws ConfigError
/// unless 0 <= threshold <= 2 and D >= 4.
SemiDenseDisparity wta_semidense(const CostVolume& volume, double threshold);

struct WtaResult {
  bool valid = false;
  int best = 0;
  int runner_up = 0;
};

/// WTA decision for a single cost column.
WtaResult wta_column(std::span<const double> column, double threshold);

/// Linear interpolation of one cost column at sub-pixel disparity `d`,
/// clamped to [0, D-1]. Invalid whenever an endpoint with non-zero weight is
/// invalid.
double sample_column(std::span<const double> column, double d);

/// Samples each pixel's cost column at disp(u,v) + (k - r) for k in [0, 2r].
Tensor3<double> lookup(const CostVolume& volume, const DisparityMap& disp, int radius);

/// Debug dump of one pixel's cost curve as "d,cost" CSV rows.
void write_cost_curve_csv(const std::filesystem::path& path, const CostVolume& volume, int u, int v);

}  // namespace tstereo
