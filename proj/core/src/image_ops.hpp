#pragma once

// Internal helpers shared by delineation and synthcam; not installed.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "granulometer/raster.hpp"

namespace granulometer::detail {

using FloatImage = Image<float>;

FloatImage to_float(const Raster& raster);

/// Separable Gaussian blur with replicated borders; sigma <= 0 copies.
FloatImage gaussian_blur(const FloatImage& src, double sigma);

/// Central-difference (Sobel) gradient magnitude in gray levels per pixel.
FloatImage gradient_magnitude(const FloatImage& src);

/// Otsu threshold over a 256-bin histogram of values clamped to [0, 255].
double otsu_threshold(const FloatImage& src);
double otsu_threshold(std::span<const float> values);

double float_percentile(std::vector<float> values, double pct);

/// Immerkaer's Laplacian-difference estimate of additive noise sigma.
double noise_sigma(const FloatImage& src);

constexpr std::array<std::array<int, 2>, 8> kNeighbors8 = {
    {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};
constexpr std::array<std::array<int, 2>, 4> kNeighbors4 = {{{0, -1}, {-1, 0}, {1, 0}, {0, 1}}};

/// Monotone bucket queue over integer levels with FIFO order inside a level.
class BucketQueue {
 public:
  explicit BucketQueue(std::size_t levels) : buckets_(levels), heads_(levels, 0) {}

  void push(std::size_t level, std::uint32_t item) {
    buckets_[level].push_back(item);
    if (level < current_) current_ = level;
    ++size_;
  }

  bool empty() const noexcept { return size_ == 0; }

  /// Pops the oldest item of the lowest non-empty level.
  std::uint32_t pop(std::size_t& level) {
    while (heads_[current_] == buckets_[current_].size()) {
      buckets_[current_].clear();
      heads_[current_] = 0;
      ++current_;
    }
    level = current_;
    --size_;
    return buckets_[current_][heads_[current_]++];
  }

 private:
  std::vector<std::vector<std::uint32_t>> buckets_;
  std::vector<std::size_t> heads_;
  std::size_t current_ = 0;
  std::size_t size_ = 0;
};

}  // namespace granulometer::detail
