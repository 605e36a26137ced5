#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "granulometer/raster.hpp"

namespace granulometer::testing {

/// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("granulometer_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Paints a filled disc (pixel centres within radius) with `value`.
template <typename T>
void paint_disc(Image<T>& img, double cx, double cy, double radius, T value) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius) img(x, y) = value;
    }
  }
}

/// Paints a filled rotated ellipse with full axes `major`, `minor`.
template <typename T>
void paint_ellipse(Image<T>& img, double cx, double cy, double major, double minor, double angle, T value) {
  const double a = major / 2.0, b = minor / 2.0, c = std::cos(angle), s = std::sin(angle);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double u = (x - cx) * c + (y - cy) * s;
      const double v = -(x - cx) * s + (y - cy) * c;
      if (u * u / (a * a) + v * v / (b * b) <= 1.0) img(x, y) = value;
    }
  }
}

inline Raster random_raster(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Raster r(w, h);
  for (auto& v : r.samples()) v = static_cast<std::uint8_t>(rng() & 0xFF);
  return r;
}

/// Every regular file under `root`, as (relative path, bytes).
inline std::vector<std::pair<std::string, std::string>> snapshot_tree(const std::filesystem::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::string bytes;
    {
      std::FILE* f = std::fopen(e.path().c_str(), "rb");
      if (f == nullptr) continue;
      char buf[65536];
      std::size_t n;
      while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) bytes.append(buf, n);
      std::fclose(f);
    }
    out.emplace_back(std::filesystem::relative(e.path(), root).generic_string(), std::move(bytes));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace granulometer::testing
