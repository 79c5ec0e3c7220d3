#include "tstereo/features.hpp"

#include <cmath>
#include <string>

#include "tstereo/error.hpp"
#include "tstereo/parallel.hpp"

namespace tstereo {

std::string_view to_string(DescriptorKind kind) {
  switch (kind) {
    case DescriptorKind::census:
      return "census";
    case DescriptorKind::zncc_patch:
      return "zncc_patch";
  }
  return "unknown";
}

DescriptorKind parse_descriptor_kind(std::string_view name) {
  if (name == "census") return DescriptorKind::census;
  if (name == "zncc_patch" || name == "zncc") return DescriptorKind::zncc_patch;
  throw ConfigError("unknown descriptor kind '" + std::string(name) + "' (expected census or zncc_patch)");
}

GrayImage average_pool(const GrayImage& image, int factor) {
  if (factor < 1) throw ConfigError("average_pool: factor must be >= 1");
  if (factor == 1) return image;
  const int w = (image.width() + factor - 1) / factor;
  const int h = (image.height() + factor - 1) / factor;
  GrayImage out(w, h);
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double sum = 0.0;
      int count = 0;
      for (int y = v * factor; y < std::min(image.height(), (v + 1) * factor); ++y)
        for (int x = u * factor; x < std::min(image.width(), (u + 1) * factor); ++x) {
          sum += image(x, y);
          ++count;
        }
      out(u, v) = sum / count;
    }
  }
  return out;
}

FeatureMap extract_features(const GrayImage& input, DescriptorKind kind, int radius, int downsample) {
  if (radius < 1) throw ConfigError("extract_features: radius must be >= 1");
  const GrayImage image = average_pool(input, downsample);
  const int w = image.width();
  const int h = image.height();
  if (2 * radius + 1 > std::min(w, h))
    throw ConfigError("extract_features: window " + std::to_string(2 * radius + 1) +
                      " exceeds image size " + std::to_string(w) + "x" + std::to_string(h));
  for (double value : image.pixels())
    if (!std::isfinite(value)) throw ConfigError("extract_features: image contains non-finite values");

  const int side = 2 * radius + 1;
  const int window = side * side;
  FeatureMap out;
  out.kind = kind;
  out.radius = radius;
  out.channels = Tensor3<double>(w, h, window + 1);

  parallel_rows(h, [&](int v) {
    for (int u = 0; u < w; ++u) {
      auto desc = out.channels.pixel(u, v);
      const double center = image(u, v);
      int c = 0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) desc[c++] = image.clamped(u + dx, v + dy);

      if (kind == DescriptorKind::census) {
        for (int k = 0; k < window; ++k) {
          const double diff = desc[k] - center;
          desc[k] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        }
      } else {
        double mean = 0.0;
        for (int k = 0; k < window; ++k) mean += desc[k];
        mean /= window;
        for (int k = 0; k < window; ++k) desc[k] -= mean;
      }
      desc[window] = 1.0;
    }
  });
  return out;
}

}  // namespace tstereo
