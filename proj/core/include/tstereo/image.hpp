#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tstereo {

/// Row-major single-channel 2D grid indexed as (u, v) = (column, row).
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int u, int v) const noexcept {
    return u >= 0 && v >= 0 && u < width_ && v < height_;
  }

  T& operator()(int u, int v) noexcept {
    assert(contains(u, v));
    return data_[index(u, v)];
  }
  const T& operator()(int u, int v) const noexcept {
    assert(contains(u, v));
    return data_[index(u, v)];
  }

  /// Sample with coordinates clamped to the image border.
  const T& clamped(int u, int v) const noexcept {
    return (*this)(std::clamp(u, 0, width_ - 1), std::clamp(v, 0, height_ - 1));
  }

  std::span<T> row(int v) noexcept {
    return {data_.data() + index(0, v), static_cast<std::size_t>(width_)};
  }
  std::span<const T> row(int v) const noexcept {
    return {data_.data() + index(0, v), static_cast<std::size_t>(width_)};
  }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  template <typename U>
  bool same_shape(const Image<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Image& a, const Image& b) = default;

 private:
  std::size_t index(int u, int v) const noexcept {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(u);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Row-major multi-channel grid; the channels of one pixel are contiguous.
template <typename T>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int width, int height, int channels, T fill = T{})
      : width_(width), height_(height), channels_(channels),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                  static_cast<std::size_t>(channels),
              fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int u, int v, int c) noexcept { return data_[index(u, v) + static_cast<std::size_t>(c)]; }
  const T& operator()(int u, int v, int c) const noexcept {
    return data_[index(u, v) + static_cast<std::size_t>(c)];
  }

  std::span<T> pixel(int u, int v) noexcept {
    return {data_.data() + index(u, v), static_cast<std::size_t>(channels_)};
  }
  std::span<const T> pixel(int u, int v) const noexcept {
    return {data_.data() + index(u, v), static_cast<std::size_t>(channels_)};
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  template <typename U>
  bool same_shape(const Tensor3<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height() && channels_ == other.channels();
  }

  friend bool operator==(const Tensor3& a, const Tensor3& b) = default;

 private:
  std::size_t index(int u, int v) const noexcept {
    assert(u >= 0 && v >= 0 && u < width_ && v < height_);
    return (static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(u)) *
           static_cast<std::size_t>(channels_);
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

using DisparityMap = Image<double>;
using GrayImage = Image<double>;
using Mask = Image<std::uint8_t>;

/// Disparity values with an explicit validity mask. Invalid pixels hold 0.
struct SemiDenseDisparity {
  DisparityMap values;
  Mask valid;

  int width() const noexcept { return values.width(); }
  int height() const noexcept { return values.height(); }
  std::size_t valid_count() const noexcept {
    return static_cast<std::size_t>(std::count(valid.pixels().begin(), valid.pixels().end(), 1));
  }
};

/// Per-pixel feature field carried across refinement iterations and frames.
struct HiddenState {
  Tensor3<double> channels;
  Mask valid;

  HiddenState() = default;
  HiddenState(int width, int height, int feature_count)
      : channels(width, height, feature_count, 0.0), valid(width, height, 0) {}

  int width() const noexcept { return channels.width(); }
  int height() const noexcept { return channels.height(); }
  int feature_count() const noexcept { return channels.channels(); }
};

}  // namespace tstereo
