#include "image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace granulometer::detail {

FloatImage to_float(const Raster& raster) {
  FloatImage out(raster.width(), raster.height());
  for (std::size_t i = 0; i < raster.size(); ++i) out[i] = static_cast<float>(raster[i]);
  return out;
}

FloatImage gaussian_blur(const FloatImage& src, double sigma) {
  if (sigma <= 0.0) return src;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * i * i / (sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = static_cast<float>(w);
    total += w;
  }
  for (auto& k : kernel) k = static_cast<float>(k / total);

  const int w = src.width();
  const int h = src.height();
  FloatImage tmp(w, h);
  FloatImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * src(std::clamp(x + k, 0, w - 1), y);
      }
      tmp(x, y) = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * tmp(x, std::clamp(y + k, 0, h - 1));
      }
      out(x, y) = acc;
    }
  }
  return out;
}

FloatImage gradient_magnitude(const FloatImage& src) {
  const int w = src.width();
  const int h = src.height();
  FloatImage out(w, h);
  auto at = [&](int x, int y) { return src(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float gx = (at(x + 1, y - 1) + 2.0f * at(x + 1, y) + at(x + 1, y + 1) - at(x - 1, y - 1) -
                        2.0f * at(x - 1, y) - at(x - 1, y + 1)) / 8.0f;
      const float gy = (at(x - 1, y + 1) + 2.0f * at(x, y + 1) + at(x + 1, y + 1) - at(x - 1, y - 1) -
                        2.0f * at(x, y - 1) - at(x + 1, y - 1)) / 8.0f;
      out(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

double otsu_threshold(const FloatImage& src) { return otsu_threshold(std::span<const float>(src.samples())); }

double otsu_threshold(std::span<const float> values) {
  std::array<double, 256> hist{};
  for (float v : values) {
    hist[static_cast<std::size_t>(std::clamp(static_cast<int>(std::lround(v)), 0, 255))] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[static_cast<std::size_t>(i)];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 256; ++t) {
    w0 += hist[static_cast<std::size_t>(t)];
    sum0 += t * hist[static_cast<std::size_t>(t)];
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  // Class 0 is [0, best_t]; the split point sits halfway to the next level.
  return best_t + 0.5;
}

double float_percentile(std::vector<float> values, double pct) {
  if (values.empty()) return 0.0;
  const double rank = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double v_lo = values[lo];
  if (hi == lo) return v_lo;
  const double v_hi = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return v_lo + (rank - static_cast<double>(lo)) * (v_hi - v_lo);
}

double noise_sigma(const FloatImage& src) {
  const int w = src.width();
  const int h = src.height();
  if (w < 3 || h < 3) return 0.0;
  double sum = 0.0;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double v = 4.0 * src(x, y) - 2.0 * (src(x - 1, y) + src(x + 1, y) + src(x, y - 1) + src(x, y + 1)) +
                       src(x - 1, y - 1) + src(x + 1, y - 1) + src(x - 1, y + 1) + src(x + 1, y + 1);
      sum += std::abs(v);
    }
  }
  return std::sqrt(std::numbers::pi / 2.0) * sum / (6.0 * (w - 2.0) * (h - 2.0));
}

}  // namespace granulometer::detail
