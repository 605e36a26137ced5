#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "granulometer/error.hpp"

namespace granulometer {

/// Row-major single-channel image. Sample type is uint8_t for luminance
/// rasters and uint16_t/int32_t for label maps.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;

  Image(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    }
    samples_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  Image(int width, int height, std::vector<T> samples)
      : width_(width), height_(height), samples_(std::move(samples)) {
    if (width <= 0 || height <= 0) {
      throw Error(ErrorCode::InvalidArgument, "image dimensions must be positive");
    }
    if (samples_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw Error(ErrorCode::InvalidArgument, "sample count does not match width x height");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  T& operator()(int x, int y) noexcept { return samples_[index(x, y)]; }
  const T& operator()(int x, int y) const noexcept { return samples_[index(x, y)]; }

  T& operator[](std::size_t i) noexcept { return samples_[i]; }
  const T& operator[](std::size_t i) const noexcept { return samples_[i]; }

  std::span<T> samples() noexcept { return samples_; }
  std::span<const T> samples() const noexcept { return samples_; }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  bool same_shape(const auto& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> samples_;
};

using Raster = Image<std::uint8_t>;
using LabelMap = Image<std::uint16_t>;

/// Copy of the rectangle [x0, x0+w) x [y0, y0+h); must lie inside src.
template <typename T>
Image<T> crop(const Image<T>& src, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > src.width() || y0 + h > src.height()) {
    throw Error(ErrorCode::InvalidArgument, "crop rectangle outside image");
  }
  Image<T> out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out(x, y) = src(x0 + x, y0 + y);
  }
  return out;
}

}  // namespace granulometer
