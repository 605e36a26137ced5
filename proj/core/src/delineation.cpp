#include "granulometer/delineation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>

#include "image_ops.hpp"

namespace granulometer {
namespace {

using detail::BucketQueue;
using detail::FloatImage;
using detail::kNeighbors8;

constexpr double kGradientLevelsPerGray = 4.0;
constexpr int kMaxGradientLevel = 65535;

double histogram_percentile(const std::array<std::size_t, 256>& hist, std::size_t count, double pct) {
  if (count == 0) return 0.0;
  const double rank = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(count - 1);
  const auto lo_rank = static_cast<std::size_t>(std::floor(rank));
  auto value_at = [&](std::size_t r) {
    std::size_t acc = 0;
    for (int v = 0; v < 256; ++v) {
      acc += hist[static_cast<std::size_t>(v)];
      if (acc > r) return static_cast<double>(v);
    }
    return 255.0;
  };
  const double lo = value_at(lo_rank);
  const double hi = value_at(std::min(lo_rank + 1, count - 1));
  return lo + (rank - static_cast<double>(lo_rank)) * (hi - lo);
}

double raster_percentile(const Raster& raster, double pct) {
  std::array<std::size_t, 256> hist{};
  for (std::uint8_t v : raster.samples()) ++hist[v];
  return histogram_percentile(hist, raster.size(), pct);
}

std::vector<std::uint16_t> quantize_gradient(const FloatImage& grad) {
  std::vector<std::uint16_t> q(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    q[i] = static_cast<std::uint16_t>(
        std::clamp(static_cast<long>(std::lround(grad[i] * kGradientLevelsPerGray)), 0L, static_cast<long>(kMaxGradientLevel)));
  }
  return q;
}

// Morphological reconstruction by erosion of (f + h) over f, computed as a
// minimax flood; the regional minima of the result are the h-minima of f.
std::vector<std::uint32_t> h_minima_reconstruction(const std::vector<std::uint16_t>& f, int width, int height, int h) {
  const std::size_t n = f.size();
  std::vector<std::uint32_t> rec(n);
  const std::size_t levels = static_cast<std::size_t>(kMaxGradientLevel + h + 1);
  BucketQueue queue(levels);
  for (std::size_t i = 0; i < n; ++i) {
    rec[i] = static_cast<std::uint32_t>(f[i]) + static_cast<std::uint32_t>(h);
    queue.push(rec[i], static_cast<std::uint32_t>(i));
  }
  while (!queue.empty()) {
    std::size_t level = 0;
    const std::uint32_t p = queue.pop(level);
    if (rec[p] != level) continue;
    const int px = static_cast<int>(p % static_cast<std::uint32_t>(width));
    const int py = static_cast<int>(p / static_cast<std::uint32_t>(width));
    for (const auto& d : kNeighbors8) {
      const int nx = px + d[0], ny = py + d[1];
      if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
      const std::size_t q = static_cast<std::size_t>(ny) * static_cast<std::size_t>(width) + static_cast<std::size_t>(nx);
      const std::uint32_t candidate = std::max<std::uint32_t>(f[q], rec[p]);
      if (candidate < rec[q]) {
        rec[q] = candidate;
        queue.push(candidate, static_cast<std::uint32_t>(q));
      }
    }
  }
  return rec;
}

// Labels regional-minimum plateaus of `values` with 1..M in raster order.
std::vector<std::uint32_t> label_regional_minima(const std::vector<std::uint32_t>& values, int width, int height,
                                                 std::uint32_t& count) {
  const std::size_t n = values.size();
  std::vector<std::uint32_t> labels(n, 0);
  std::vector<std::uint8_t> visited(n, 0);
  std::vector<std::uint32_t> plateau;
  std::vector<std::uint32_t> stack;
  count = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (visited[start]) continue;
    const std::uint32_t v = values[start];
    plateau.clear();
    stack.assign(1, static_cast<std::uint32_t>(start));
    visited[start] = 1;
    bool is_minimum = true;
    while (!stack.empty()) {
      const std::uint32_t p = stack.back();
      stack.pop_back();
      plateau.push_back(p);
      const int px = static_cast<int>(p % static_cast<std::uint32_t>(width));
      const int py = static_cast<int>(p / static_cast<std::uint32_t>(width));
      for (const auto& d : kNeighbors8) {
        const int nx = px + d[0], ny = py + d[1];
        if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
        const std::size_t q = static_cast<std::size_t>(ny) * static_cast<std::size_t>(width) + static_cast<std::size_t>(nx);
        if (values[q] < v) is_minimum = false;
        if (values[q] == v && !visited[q]) {
          visited[q] = 1;
          stack.push_back(static_cast<std::uint32_t>(q));
        }
      }
    }
    if (is_minimum) {
      ++count;
      for (std::uint32_t p : plateau) labels[p] = count;
    }
  }
  return labels;
}

// Meyer flooding without watershed lines: every pixel joins the basin that
// reaches it first in (level, FIFO) order.
void flood(std::vector<std::uint32_t>& labels, const std::vector<std::uint16_t>& f, int width, int height) {
  BucketQueue queue(static_cast<std::size_t>(kMaxGradientLevel) + 1);
  auto push_neighbors = [&](std::uint32_t p, std::size_t floor_level) {
    const int px = static_cast<int>(p % static_cast<std::uint32_t>(width));
    const int py = static_cast<int>(p / static_cast<std::uint32_t>(width));
    for (const auto& d : kNeighbors8) {
      const int nx = px + d[0], ny = py + d[1];
      if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
      const std::size_t q = static_cast<std::size_t>(ny) * static_cast<std::size_t>(width) + static_cast<std::size_t>(nx);
      if (labels[q] != 0) continue;
      labels[q] = labels[p];
      queue.push(std::max<std::size_t>(f[q], floor_level), static_cast<std::uint32_t>(q));
    }
  };
  // Seed from the marker pixels only; pixels labelled while seeding must
  // wait for their turn in the queue.
  std::vector<std::uint32_t> seeds;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0) seeds.push_back(static_cast<std::uint32_t>(i));
  }
  for (std::uint32_t p : seeds) push_neighbors(p, 0);
  while (!queue.empty()) {
    std::size_t level = 0;
    const std::uint32_t p = queue.pop(level);
    push_neighbors(p, level);
  }
}

struct BasinStats {
  std::size_t area = 0;
  std::size_t excluded = 0;
  double intensity_sum = 0.0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
  int min_x = std::numeric_limits<int>::max();
  int min_y = std::numeric_limits<int>::max();
  int max_x = -1;
  int max_y = -1;
  bool touches_border = false;
};

bool inside_any(std::span<const DetectedCircle> circles, int x, int y) {
  for (const auto& c : circles) {
    const double dx = x - c.cx, dy = y - c.cy;
    if (dx * dx + dy * dy <= c.radius * c.radius) return true;
  }
  return false;
}

// 0.5 / 99.5 percentile spread of the pixels outside the exclusions; scale
// objects are not part of the pile and must not lend it contrast.
double robust_range(const Raster& raster, std::span<const DetectedCircle> exclusions) {
  std::array<std::size_t, 256> hist{};
  std::size_t count = 0;
  for (int y = 0; y < raster.height(); ++y) {
    for (int x = 0; x < raster.width(); ++x) {
      if (!exclusions.empty() && inside_any(exclusions, x, y)) continue;
      ++hist[raster(x, y)];
      ++count;
    }
  }
  return histogram_percentile(hist, count, 99.5) - histogram_percentile(hist, count, 0.5);
}

// Thin elongated basins are the rim or contact zone between two fragments
// rather than a fragment of their own. Each is absorbed by the bright
// neighbour it shares the longest boundary with.
void merge_slivers(std::vector<std::uint32_t>& basins, std::uint32_t basin_count, const FloatImage& smooth,
                   double foreground, const SegmentationParams& params) {
  const int width = smooth.width();
  const int height = smooth.height();
  struct Moments {
    double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0, intensity = 0;
  };
  std::vector<Moments> m(basin_count + 1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      Moments& s = m[basins[i]];
      s.n += 1;
      s.sx += x;
      s.sy += y;
      s.sxx += static_cast<double>(x) * x;
      s.syy += static_cast<double>(y) * y;
      s.sxy += static_cast<double>(x) * y;
      s.intensity += smooth[i];
    }
  }
  std::vector<bool> sliver(basin_count + 1, false);
  bool any = false;
  for (std::uint32_t b = 1; b <= basin_count; ++b) {
    const Moments& s = m[b];
    if (s.n == 0) continue;
    const EllipseAxes axes = ellipse_from_moments(s.n, s.sx, s.sy, s.sxx, s.syy, s.sxy);
    sliver[b] = axes.minor < params.sliver_width_px && axes.major >= params.sliver_elongation * axes.minor &&
                s.intensity / s.n >= foreground;
    any = any || sliver[b];
  }
  if (!any) return;

  std::unordered_map<std::uint64_t, std::size_t> contact;
  auto note = [&](std::uint32_t a, std::uint32_t b) {
    if (a == b) return;
    if (sliver[a]) ++contact[(static_cast<std::uint64_t>(a) << 32) | b];
    if (sliver[b]) ++contact[(static_cast<std::uint64_t>(b) << 32) | a];
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      if (x + 1 < width) note(basins[i], basins[i + 1]);
      if (y + 1 < height) note(basins[i], basins[i + width]);
    }
  }
  std::vector<std::uint32_t> target(basin_count + 1);
  std::iota(target.begin(), target.end(), 0u);
  std::vector<std::size_t> best(basin_count + 1, 0);
  for (const auto& [key, count] : contact) {
    const auto a = static_cast<std::uint32_t>(key >> 32);
    const auto b = static_cast<std::uint32_t>(key & 0xffffffffu);
    if (sliver[b] || m[b].intensity / m[b].n < foreground) continue;
    // Ties go to the lower label so the result does not depend on hash order.
    if (count > best[a] || (count == best[a] && b < target[a])) {
      best[a] = count;
      target[a] = b;
    }
  }
  for (auto& v : basins) v = target[v];
}

// The shaded flank of an obliquely lit fragment is flat and dim, so the
// background marker can flood it before the fragment's own marker crosses
// the shading ramp. Pixels of dark basins that are brighter than the Otsu
// split of the dark pixels are handed to the bright basin that reaches them
// first over the gradient.
void reclaim_flanks(std::vector<std::uint32_t>& basins, std::uint32_t basin_count, const FloatImage& image,
                    const std::vector<std::uint16_t>& grad, double foreground) {
  const int width = image.width();
  const int height = image.height();
  std::vector<double> sum(basin_count + 1, 0.0);
  std::vector<std::size_t> n(basin_count + 1, 0);
  for (std::size_t i = 0; i < basins.size(); ++i) {
    sum[basins[i]] += image[i];
    ++n[basins[i]];
  }
  std::vector<bool> bright(basin_count + 1, false);
  for (std::uint32_t b = 1; b <= basin_count; ++b) bright[b] = n[b] > 0 && sum[b] / static_cast<double>(n[b]) >= foreground;
  std::vector<float> dark;
  for (std::size_t i = 0; i < basins.size(); ++i) {
    if (!bright[basins[i]]) dark.push_back(image[i]);
  }
  if (dark.empty()) return;
  // Otsu separates open ground from shaded flanks; the blurred fragment
  // edge sits half-way between the ground level and the fragment threshold.
  const double otsu = detail::otsu_threshold(std::span<const float>(dark));
  double ground = 0.0;
  std::size_t ground_n = 0;
  for (float v : dark) {
    if (v < otsu) {
      ground += v;
      ++ground_n;
    }
  }
  if (ground_n > 0) ground /= static_cast<double>(ground_n);
  double split = 0.5 * (ground + foreground);
  if (split >= foreground) return;

  std::vector<std::uint8_t> open(basins.size(), 0);
  for (std::size_t i = 0; i < basins.size(); ++i) open[i] = !bright[basins[i]] && image[i] >= split;
  BucketQueue queue(static_cast<std::size_t>(kMaxGradientLevel) + 1);
  auto push_neighbors = [&](std::uint32_t p, std::size_t floor_level) {
    const int px = static_cast<int>(p % static_cast<std::uint32_t>(width));
    const int py = static_cast<int>(p / static_cast<std::uint32_t>(width));
    for (const auto& d : kNeighbors8) {
      const int nx = px + d[0], ny = py + d[1];
      if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
      const std::size_t q = static_cast<std::size_t>(ny) * static_cast<std::size_t>(width) + static_cast<std::size_t>(nx);
      if (!open[q]) continue;
      open[q] = 0;
      basins[q] = basins[p];
      queue.push(std::max<std::size_t>(grad[q], floor_level), static_cast<std::uint32_t>(q));
    }
  };
  std::vector<std::uint32_t> seeds;
  for (std::size_t i = 0; i < basins.size(); ++i) {
    if (bright[basins[i]]) seeds.push_back(static_cast<std::uint32_t>(i));
  }
  for (std::uint32_t p : seeds) push_neighbors(p, 0);
  while (!queue.empty()) {
    std::size_t level = 0;
    const std::uint32_t p = queue.pop(level);
    push_neighbors(p, level);
  }
}

}  // namespace

double percentile(const Raster& raster, double pct) {
  if (raster.empty()) throw Error(ErrorCode::InvalidArgument, "percentile of empty raster");
  return raster_percentile(raster, pct);
}

EllipseAxes ellipse_from_moments(double n, double sum_x, double sum_y, double sum_xx, double sum_yy, double sum_xy) {
  const double mx = sum_x / n, my = sum_y / n;
  // Each pixel is a unit square: add its own variance of 1/12 per axis.
  const double cxx = sum_xx / n - mx * mx + 1.0 / 12.0;
  const double cyy = sum_yy / n - my * my + 1.0 / 12.0;
  const double cxy = sum_xy / n - mx * my;
  const double mean = 0.5 * (cxx + cyy);
  const double diff = 0.5 * (cxx - cyy);
  const double root = std::sqrt(diff * diff + cxy * cxy);
  const double l1 = mean + root;
  const double l2 = std::max(mean - root, 0.0);
  EllipseAxes axes;
  axes.major = 4.0 * std::sqrt(l1);
  axes.minor = 4.0 * std::sqrt(l2);
  axes.orientation = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
  return axes;
}

Raster preprocess(const Raster& raster, const ContrastOptions& options) {
  if (raster.empty()) throw Error(ErrorCode::InvalidArgument, "empty raster");
  FloatImage smooth = detail::gaussian_blur(detail::to_float(raster), options.smoothing_sigma);
  double lo = 0.0, hi = 255.0;
  switch (options.mode) {
    case StretchMode::None:
      break;
    case StretchMode::Linear: {
      auto [mn, mx] = std::minmax_element(smooth.samples().begin(), smooth.samples().end());
      lo = *mn;
      hi = *mx;
      break;
    }
    case StretchMode::Percentile: {
      std::vector<float> values(smooth.samples().begin(), smooth.samples().end());
      lo = detail::float_percentile(values, options.low_percentile);
      hi = detail::float_percentile(std::move(values), options.high_percentile);
      break;
    }
  }
  double gain = 1.0;
  if (options.mode != StretchMode::None) {
    gain = hi > lo ? 255.0 / (hi - lo) : 0.0;
    if (options.max_gain > 0.0) gain = std::min(gain, options.max_gain);
  }
  Raster out(raster.width(), raster.height());
  for (std::size_t i = 0; i < smooth.size(); ++i) {
    const double v = options.mode == StretchMode::None ? smooth[i] : (smooth[i] - lo) * gain;
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

DelineationNet segment(const Raster& raster, const SegmentationParams& params,
                       std::span<const DetectedCircle> exclusions) {
  if (raster.empty()) throw Error(ErrorCode::InvalidArgument, "empty raster");
  if (params.min_particle_area < 1) throw Error(ErrorCode::InvalidArgument, "min_particle_area must be >= 1");
  const double range = robust_range(raster, exclusions);
  if (range < params.low_contrast_floor) {
    throw Error(ErrorCode::LowContrast, "dynamic range " + std::to_string(range) + " below floor " +
                                            std::to_string(params.low_contrast_floor));
  }

  const int width = raster.width();
  const int height = raster.height();
  const FloatImage smooth = detail::gaussian_blur(detail::to_float(raster), params.gradient_sigma);
  const std::vector<std::uint16_t> grad = quantize_gradient(detail::gradient_magnitude(smooth));
  // The marker depth is stated for a full-range image and scales with the
  // contrast actually present, so dim frames keep their weak rims.
  // A floor proportional to the residual noise stops noise dimples from
  // seeding basins.
  const double contrast = std::min(range, 255.0) / 255.0;
  const double depth =
      std::max(params.marker_threshold * contrast, params.marker_noise_factor * detail::noise_sigma(smooth));
  const int h = std::max(1, static_cast<int>(std::lround(depth * kGradientLevelsPerGray)));

  std::uint32_t basin_count = 0;
  std::vector<std::uint32_t> markers =
      label_regional_minima(h_minima_reconstruction(grad, width, height, h), width, height, basin_count);
  std::vector<std::uint32_t> basins = markers;
  flood(basins, grad, width, height);
  const double foreground = detail::otsu_threshold(smooth);

  // A bright basin seeded from its darkest part is a valley between touching
  // fragments or a self-shadowed flank, not a fragment top. Its marker is
  // dropped and the neighbours re-flood it.
  {
    std::vector<double> basin_sum(basin_count + 1, 0.0), marker_sum(basin_count + 1, 0.0);
    std::vector<std::size_t> basin_n(basin_count + 1, 0), marker_n(basin_count + 1, 0);
    for (std::size_t i = 0; i < basins.size(); ++i) {
      basin_sum[basins[i]] += smooth[i];
      ++basin_n[basins[i]];
      if (markers[i] != 0) {
        marker_sum[markers[i]] += smooth[i];
        ++marker_n[markers[i]];
      }
    }
    std::vector<std::uint32_t> remap(basin_count + 1, 0);
    std::uint32_t kept = 0;
    for (std::uint32_t b = 1; b <= basin_count; ++b) {
      const double basin_mean = basin_sum[b] / static_cast<double>(basin_n[b]);
      const double marker_mean = marker_sum[b] / static_cast<double>(marker_n[b]);
      const bool valley = basin_mean >= foreground && marker_mean < basin_mean;
      if (!valley) remap[b] = ++kept;
    }
    if (kept > 0 && kept < basin_count) {
      for (auto& m : markers) m = remap[m];
      basin_count = kept;
      basins = markers;
      flood(basins, grad, width, height);
    }
  }

  // Reclaim works on the unsmoothed input: the gradient blur would
  // otherwise hand every fragment a one-pixel halo.
  if (params.reclaim_flanks) {
    const FloatImage raw = detail::to_float(raster);
    reclaim_flanks(basins, basin_count, raw, grad, detail::otsu_threshold(raw));
  }
  if (params.sliver_width_px > 0.0) merge_slivers(basins, basin_count, smooth, foreground, params);

  std::vector<BasinStats> stats(basin_count + 1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = raster.index(x, y);
      BasinStats& s = stats[basins[i]];
      ++s.area;
      s.intensity_sum += smooth[i];
      if (!exclusions.empty() && inside_any(exclusions, x, y)) {
        ++s.excluded;
        continue;
      }
      s.sx += x;
      s.sy += y;
      s.sxx += static_cast<double>(x) * x;
      s.syy += static_cast<double>(y) * y;
      s.sxy += static_cast<double>(x) * y;
      s.min_x = std::min(s.min_x, x);
      s.max_x = std::max(s.max_x, x);
      s.min_y = std::min(s.min_y, y);
      s.max_y = std::max(s.max_y, y);
      if (x == 0 || y == 0 || x == width - 1 || y == height - 1) s.touches_border = true;
    }
  }

  enum class Role : std::uint8_t { Outside, Unresolved, Particle };
  std::vector<Role> role(basin_count + 1, Role::Outside);
  std::vector<std::uint16_t> particle_label(basin_count + 1, 0);
  DelineationNet net;
  net.min_particle_area = params.min_particle_area;
  std::uint32_t next_id = 0;
  for (std::uint32_t b = 1; b <= basin_count; ++b) {
    const BasinStats& s = stats[b];
    const std::size_t kept = s.area - s.excluded;
    if (kept == 0 || 2 * s.excluded > s.area) continue;
    if (s.intensity_sum / static_cast<double>(s.area) < foreground) continue;
    if (params.exclude_border && s.touches_border) continue;
    if (kept < static_cast<std::size_t>(params.min_particle_area)) {
      role[b] = Role::Unresolved;
      continue;
    }
    if (next_id == std::numeric_limits<std::uint16_t>::max()) {
      throw Error(ErrorCode::InvalidArgument, "more than 65535 particles in one raster");
    }
    role[b] = Role::Particle;
    particle_label[b] = static_cast<std::uint16_t>(++next_id);

    const double n = static_cast<double>(kept);
    const EllipseAxes axes = ellipse_from_moments(n, s.sx, s.sy, s.sxx, s.syy, s.sxy);
    Particle p;
    p.id = particle_label[b];
    p.area = n;
    p.centroid_x = s.sx / n;
    p.centroid_y = s.sy / n;
    p.ellipse_major = axes.major;
    p.ellipse_minor = axes.minor;
    p.orientation = axes.orientation;
    p.bbox_width = s.max_x - s.min_x + 1;
    p.bbox_height = s.max_y - s.min_y + 1;
    if (params.exclude_border) {
      const double free_w = width - p.bbox_width;
      const double free_h = height - p.bbox_height;
      p.edge_weight = (free_w > 0 && free_h > 0)
                          ? std::min(static_cast<double>(width) * height / (free_w * free_h), 100.0)
                          : 100.0;
    }
    net.particles.push_back(p);
  }

  net.label_map = LabelMap(width, height);
  net.analysis_mask = Raster(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = raster.index(x, y);
      const std::uint32_t b = basins[i];
      if (role[b] == Role::Outside) continue;
      if (!exclusions.empty() && inside_any(exclusions, x, y)) continue;
      net.analysis_mask[i] = 255;
      ++net.analysis_region_px;
      if (role[b] == Role::Particle) {
        net.label_map[i] = particle_label[b];
      } else {
        ++net.unresolved_px;
      }
    }
  }
  net.unresolved_fraction = net.analysis_region_px > 0
                                ? static_cast<double>(net.unresolved_px) / static_cast<double>(net.analysis_region_px)
                                : 0.0;
  return net;
}

ScaleCalibration detect_scale_spheres(const Raster& raster, double true_diameter_mm, const SphereDetectOptions& options) {
  if (!(true_diameter_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "true diameter must be > 0");
  if (raster.empty()) throw Error(ErrorCode::InvalidArgument, "empty raster");
  const int width = raster.width();
  const int height = raster.height();
  const double lo = raster_percentile(raster, 1.0);
  const double hi = *std::max_element(raster.samples().begin(), raster.samples().end());
  const double range = hi - lo;
  if (range < 2.0) throw Error(ErrorCode::NoScaleFound, "raster has no contrast");
  const double threshold = lo + options.brightness_fraction * range;

  std::vector<std::uint8_t> visited(raster.size(), 0);
  std::vector<std::uint32_t> stack, component;
  ScaleCalibration cal;
  cal.method = ScaleMethod::SphereDetect;

  auto ring_mean = [&](double cx, double cy, double r0, double r1) {
    double sum = 0.0;
    std::size_t count = 0;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - r1)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(cx + r1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - r1)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(cy + r1)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x - cx, y - cy);
        if (d >= r0 && d <= r1) {
          sum += raster(x, y);
          ++count;
        }
      }
    }
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
  };

  for (std::size_t start = 0; start < raster.size(); ++start) {
    if (visited[start] || raster[start] < threshold) continue;
    component.clear();
    stack.assign(1, static_cast<std::uint32_t>(start));
    visited[start] = 1;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    while (!stack.empty()) {
      const std::uint32_t p = stack.back();
      stack.pop_back();
      component.push_back(p);
      const int px = static_cast<int>(p % static_cast<std::uint32_t>(width));
      const int py = static_cast<int>(p / static_cast<std::uint32_t>(width));
      sx += px;
      sy += py;
      sxx += static_cast<double>(px) * px;
      syy += static_cast<double>(py) * py;
      sxy += static_cast<double>(px) * py;
      for (const auto& d : kNeighbors8) {
        const int nx = px + d[0], ny = py + d[1];
        if (!raster.contains(nx, ny)) continue;
        const std::size_t q = raster.index(nx, ny);
        if (!visited[q] && raster[q] >= threshold) {
          visited[q] = 1;
          stack.push_back(static_cast<std::uint32_t>(q));
        }
      }
    }
    const double n = static_cast<double>(component.size());
    double radius = std::sqrt(n / std::numbers::pi);
    if (radius < options.min_radius_px || radius > options.max_radius_px) continue;
    const EllipseAxes axes = ellipse_from_moments(n, sx, sy, sxx, syy, sxy);
    if (axes.major > options.max_aspect * axes.minor) continue;
    double cx = sx / n, cy = sy / n;

    // Refine at the midpoint between the disc interior and its surroundings.
    const double inner = ring_mean(cx, cy, 0.0, 0.7 * radius);
    const double outer = ring_mean(cx, cy, radius + 3.0, radius + 3.0 + std::max(4.0, 0.15 * radius));
    const double score = (inner - outer) / range;
    if (score < options.min_score) continue;
    const double mid = 0.5 * (inner + outer);
    const double reach = radius + 3.0;
    double count = 0, rx = 0, ry = 0, inside_disc = 0, disc_px = 0;
    for (int y = std::max(0, static_cast<int>(cy - reach)); y <= std::min(height - 1, static_cast<int>(cy + reach)); ++y) {
      for (int x = std::max(0, static_cast<int>(cx - reach)); x <= std::min(width - 1, static_cast<int>(cx + reach)); ++x) {
        const double d = std::hypot(x - cx, y - cy);
        if (d > reach) continue;
        const bool bright = raster(x, y) >= mid;
        if (bright) {
          count += 1;
          rx += x;
          ry += y;
        }
        if (d <= radius - 1.0) {
          disc_px += 1;
          if (bright) inside_disc += 1;
        }
      }
    }
    if (disc_px == 0 || inside_disc / disc_px < options.min_fill) continue;
    // Interior must be flat: spheres are uniform discs, rocks are shaded caps.
    const double core = ring_mean(cx, cy, 0.0, 0.35 * radius);
    if (std::abs(core - inner) > 0.1 * range) continue;
    // A step edge keeps its size between the two thresholds; a shaded cap
    // grows well beyond its bright top.
    const double refined = std::sqrt(count / std::numbers::pi);
    if (std::abs(refined - radius) > std::max(2.0, 0.05 * radius)) continue;
    cx = rx / count;
    cy = ry / count;
    radius = refined;
    // Most of the step must happen within a few pixels of the rim.
    const double rim_in = ring_mean(cx, cy, std::max(0.0, radius - 3.0), radius - 1.0);
    const double rim_out = ring_mean(cx, cy, radius + 1.0, radius + 3.0);
    if (rim_in - rim_out < options.min_edge_sharpness * (inner - outer)) continue;
    cal.circles.push_back({cx, cy, radius, score});
  }
  if (cal.circles.empty()) throw Error(ErrorCode::NoScaleFound, "no circular scale object passed the template test");
  double mean_diameter = 0.0;
  for (const auto& c : cal.circles) mean_diameter += 2.0 * c.radius;
  mean_diameter /= static_cast<double>(cal.circles.size());
  cal.mm_per_px = true_diameter_mm / mean_diameter;
  cal.n_objects = static_cast<int>(cal.circles.size());
  return cal;
}

ScaleCalibration calibration_from_annotation(std::span<const io::TracedCircle> circles) {
  if (circles.empty()) throw Error(ErrorCode::EmptyAnnotation, "no traced scale objects");
  ScaleCalibration cal;
  cal.method = ScaleMethod::ManualTrace;
  double diameter_px = 0.0, diameter_mm = 0.0;
  for (const auto& c : circles) {
    diameter_px += 2.0 * c.radius_px;
    diameter_mm += c.diameter_mm;
    cal.circles.push_back({c.cx_px, c.cy_px, c.radius_px, 1.0});
  }
  cal.mm_per_px = diameter_mm / diameter_px;
  cal.n_objects = static_cast<int>(circles.size());
  return cal;
}

QualityReport match_to_truth(const LabelMap& predicted, const LabelMap& truth) {
  if (!predicted.same_shape(truth)) throw Error(ErrorCode::DimensionMismatch, "label maps differ in size");
  std::unordered_map<std::uint32_t, std::size_t> overlap;
  std::vector<std::size_t> pred_area(65536, 0), truth_area(65536, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::uint16_t p = predicted[i], t = truth[i];
    ++pred_area[p];
    ++truth_area[t];
    if (p != 0 && t != 0) ++overlap[(static_cast<std::uint32_t>(p) << 16) | t];
  }
  // Fusion: truth region whose majority lies in one predicted region.
  // Disintegration: predicted region whose majority lies in one truth region.
  std::vector<int> truths_per_pred(65536, 0), preds_per_truth(65536, 0);
  std::vector<std::pair<std::uint32_t, std::size_t>> entries(overlap.begin(), overlap.end());
  std::sort(entries.begin(), entries.end());
  for (const auto& [key, count] : entries) {
    const std::uint16_t p = static_cast<std::uint16_t>(key >> 16), t = static_cast<std::uint16_t>(key & 0xffff);
    if (2 * count > truth_area[t]) ++truths_per_pred[p];
    if (2 * count > pred_area[p]) ++preds_per_truth[t];
  }
  QualityReport report;
  for (std::size_t l = 1; l < 65536; ++l) {
    if (pred_area[l] > 0) ++report.predicted_regions;
    if (truth_area[l] > 0) ++report.truth_regions;
    if (truths_per_pred[l] >= 2) ++report.fusion;
    if (preds_per_truth[l] >= 2) ++report.disintegration;
  }

  // Boundary IoU: boundary pixels of each map dilated by one pixel.
  const int w = truth.width(), h = truth.height();
  auto boundary_band = [&](const LabelMap& m) {
    std::vector<std::uint8_t> edge(m.size(), 0), band(m.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::uint16_t v = m(x, y);
        for (const auto& d : detail::kNeighbors4) {
          const int nx = x + d[0], ny = y + d[1];
          if (m.contains(nx, ny) && m(nx, ny) != v) {
            edge[m.index(x, y)] = 1;
            break;
          }
        }
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!edge[m.index(x, y)]) continue;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (m.contains(x + dx, y + dy)) band[m.index(x + dx, y + dy)] = 1;
          }
        }
      }
    }
    return band;
  };
  const auto bp = boundary_band(predicted);
  const auto bt = boundary_band(truth);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < bp.size(); ++i) {
    inter += (bp[i] & bt[i]);
    uni += (bp[i] | bt[i]);
  }
  report.boundary_iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  return report;
}

}  // namespace granulometer
