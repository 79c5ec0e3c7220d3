#pragma once

#include <string_view>

#include "tstereo/image.hpp"

namespace tstereo {

enum class DescriptorKind { census, zncc_patch };

std::string_view to_string(DescriptorKind kind);
/// Throws ConfigError for unknown names.
DescriptorKind parse_descriptor_kind(std::string_view name);

/// Dense per-pixel descriptors. For extracted maps the last channel is the
/// constant 1 so no descriptor has zero norm.
struct FeatureMap {
  Tensor3<double> channels;
  DescriptorKind kind = DescriptorKind::census;
  int radius = 0;

  int width() const noexcept { return channels.width(); }
  int height() const noexcept { return channels.height(); }
  int channel_count() const noexcept { return channels.channels(); }
};

/// Box-filter downsampling by an integer factor; partial edge blocks are
/// averaged over the pixels they contain.
GrayImage average_pool(const GrayImage& image, int factor);

/// Window descriptors with clamped border sampling.
///
/// census: sign(I(neighbor) - I(center)) per window position.
/// zncc_patch: window intensities minus the window mean.
///
/// Both append one constant channel of value 1, so K = (2r+1)^2 + 1. The
/// image is average-pooled by `downsample` first.
FeatureMap extract_features(const GrayImage& image, DescriptorKind kind, int radius, int downsample = 1);

}  // namespace tstereo
