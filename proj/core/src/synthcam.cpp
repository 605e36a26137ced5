#include "granulometer/synthcam.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace granulometer::synthcam {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kAmbient = 0.30;
constexpr double kSphereAlbedo = 0.95;
// Cast shadows stop growing once the source is this close to the horizon.
constexpr double kMaxShadowReach = 10.0;

struct PixelEllipse {
  double cx, cy, a, b, cos_t, sin_t;
};

PixelEllipse to_pixels(const SceneParticle& p, double mm_per_px) {
  const double px_per_m = 1000.0 / mm_per_px;
  return {p.x_m * px_per_m,           p.y_m * px_per_m,         p.semi_major_m * px_per_m,
          p.semi_minor_m * px_per_m, std::cos(p.angle_rad), std::sin(p.angle_rad)};
}

// Calls fn(x, y, u, v) for every pixel centre inside the ellipse, where
// (u, v) are coordinates in the ellipse frame.
template <typename Fn>
void for_each_pixel(const PixelEllipse& e, int width, int height, Fn&& fn) {
  const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - e.a)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(e.cx + e.a)));
  const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.a)));
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(e.cy + e.a)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - e.cx, dy = y - e.cy;
      const double u = dx * e.cos_t + dy * e.sin_t;
      const double v = -dx * e.sin_t + dy * e.cos_t;
      if ((u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0) fn(x, y, u, v);
    }
  }
}

bool in_sphere(const std::optional<DetectedCircle>& sphere, int x, int y) {
  if (!sphere) return false;
  const double dx = x - sphere->cx, dy = y - sphere->cy;
  return dx * dx + dy * dy <= sphere->radius * sphere->radius;
}

std::optional<DetectedCircle> sphere_disc(const SceneSpec& spec) {
  if (!spec.scale_sphere) return std::nullopt;
  const double px_per_m = 1000.0 / spec.mm_per_px;
  return DetectedCircle{spec.scale_sphere->x_m * px_per_m, spec.scale_sphere->y_m * px_per_m,
                        spec.scale_sphere->diameter_mm / 2.0 / spec.mm_per_px, 1.0};
}

LightingCondition row(std::string label, double pile, std::optional<double> emittance, std::optional<double> tilt,
                      std::optional<double> distance, std::string position, double evenness) {
  LightingCondition c;
  c.label = std::move(label);
  c.pile_illuminance_lx = pile;
  c.source_emittance_lx = emittance;
  c.source_tilt_deg = tilt;
  c.source_distance_m = distance;
  c.source_position = std::move(position);
  c.evenness = evenness;
  return c;
}

}  // namespace

void LightingCondition::validate() const {
  if (!(pile_illuminance_lx >= 0.0)) throw Error(ErrorCode::InvalidArgument, "pile illuminance must be >= 0");
  if (!(evenness >= 0.0 && evenness <= 1.0)) throw Error(ErrorCode::InvalidArgument, "evenness must lie in [0, 1]");
  if (source_tilt_deg && !(*source_tilt_deg >= 0.0 && *source_tilt_deg < 90.0)) {
    throw Error(ErrorCode::InvalidArgument, "source tilt must lie in [0, 90)");
  }
}

// Evenness is a modelling input, not recorded data: even for the ceiling
// and artificial setups, strongly uneven for the uneven and dark rows.
std::vector<LightingCondition> indoor_conditions() {
  return {
      row("normal", 450.0, 1815.0, 0.0, 3.0, "ceiling, 3 m above pile", 1.0),
      row("dim", 120.0, 1815.0, 0.0, 3.0, "ceiling, 3 m above pile", 1.0),
      row("uneven", 40.0, 1815.0, 0.0, 3.0, "ceiling, 3 m above pile", 0.3),
      row("dark", 11.0, std::nullopt, std::nullopt, std::nullopt, "NA", 0.2),
      row("artificial-1", 14.0, 1000.0, 20.0, 3.0, "20 deg tilt, 3 m from pile center", 1.0),
      row("artificial-2", 18.0, 1000.0, 30.0, 2.0, "30 deg tilt, 2 m from pile center", 1.0),
  };
}

std::vector<LightingCondition> outdoor_conditions() {
  return {
      row("cloudy", 9500.0, 54000.0, std::nullopt, std::nullopt, "NA", 1.0),
      row("dusk", 363.0, 1966.0, std::nullopt, std::nullopt, "NA", 1.0),
      row("artificial", 14.0, 18.0, 45.0, 30.0, "45 deg tilt, 30 m from pile", 1.0),
      row("dark", 3.0, 3.0, std::nullopt, std::nullopt, "NA", 1.0),
  };
}

void SceneSpec::validate() const {
  if (!(width_m > 0.0 && height_m > 0.0)) throw Error(ErrorCode::InvalidArgument, "scene extent must be positive");
  if (!(mm_per_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "mm_per_px must be > 0");
  if (particle_count < 1) throw Error(ErrorCode::InvalidArgument, "particle_count must be >= 1");
  if (particle_count > 65535) throw Error(ErrorCode::InvalidArgument, "particle_count must be <= 65535");
  if (!target.valid()) throw Error(ErrorCode::InvalidArgument, "invalid target Swebrec parameters");
  if (!(max_aspect >= 1.0)) throw Error(ErrorCode::InvalidArgument, "max_aspect must be >= 1");
  if (!(max_overlap >= 0.0 && max_overlap < 1.0)) throw Error(ErrorCode::InvalidArgument, "max_overlap must lie in [0, 1)");
  if (!(min_size_mm > 0.0 && min_size_mm < target.x_max)) {
    throw Error(ErrorCode::InvalidArgument, "min_size_mm must lie in (0, x_max)");
  }
  if (!(rock_albedo_min > 0.0 && rock_albedo_min <= rock_albedo_max && rock_albedo_max <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "rock albedo range must satisfy 0 < min <= max <= 1");
  }
  if (!(background_albedo >= 0.0 && background_albedo <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "background albedo must lie in [0, 1]");
  }
  if (scale_sphere && !(scale_sphere->diameter_mm > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "scale sphere diameter must be > 0");
  }
}

void SensorModel::validate() const {
  if (!(exposure_gain > 0.0)) throw Error(ErrorCode::InvalidArgument, "exposure_gain must be > 0");
  if (!(noise_floor_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_floor_sigma must be >= 0");
  if (!(full_well > 0.0 && full_well <= 255.0)) throw Error(ErrorCode::InvalidArgument, "full_well must lie in (0, 255]");
}

double uniform_open01(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) {
  const double u1 = uniform_open01(rng);
  const double u2 = uniform_open01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double sample_swebrec(const SwebrecParams& params, std::mt19937_64& rng) {
  return swebrec_quantile(params, uniform_open01(rng));
}

LabelMap rasterize_truth(const SceneSpec& spec, int width_px, int height_px, const std::vector<SceneParticle>& particles) {
  LabelMap labels(width_px, height_px);
  const auto sphere = sphere_disc(spec);
  for (const auto& p : particles) {
    for_each_pixel(to_pixels(p, spec.mm_per_px), width_px, height_px, [&](int x, int y, double, double) {
      if (labels(x, y) == 0 && !in_sphere(sphere, x, y)) labels(x, y) = p.id;
    });
  }
  return labels;
}

Scene generate_pile(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  scene.spec = spec;
  scene.width_px = static_cast<int>(std::lround(spec.width_m * 1000.0 / spec.mm_per_px));
  scene.height_px = static_cast<int>(std::lround(spec.height_m * 1000.0 / spec.mm_per_px));
  if (scene.width_px < 1 || scene.height_px < 1) throw Error(ErrorCode::InvalidArgument, "scene smaller than one pixel");

  struct Draw {
    double sieve_mm, aspect, angle, albedo;
  };
  std::mt19937_64 size_rng(spec.packing_seed);
  std::vector<Draw> draws(static_cast<std::size_t>(spec.particle_count));
  for (auto& d : draws) {
    d.sieve_mm = std::clamp(sample_swebrec(spec.target, size_rng), spec.min_size_mm, spec.target.x_max);
    d.aspect = 1.0 + (spec.max_aspect - 1.0) * uniform_open01(size_rng);
    d.angle = std::numbers::pi * uniform_open01(size_rng);
    d.albedo = spec.rock_albedo_min + (spec.rock_albedo_max - spec.rock_albedo_min) * uniform_open01(size_rng);
  }
  std::stable_sort(draws.begin(), draws.end(), [](const Draw& a, const Draw& b) { return a.sieve_mm > b.sieve_mm; });

  std::mt19937_64 place_rng(spec.packing_seed ^ 0x9e3779b97f4a7c15ULL);
  const auto sphere = sphere_disc(spec);
  LabelMap occupied(scene.width_px, scene.height_px);
  const double m_per_px = spec.mm_per_px / 1000.0;

  for (std::size_t i = 0; i < draws.size(); ++i) {
    const Draw& d = draws[i];
    SceneParticle p;
    p.id = static_cast<std::uint16_t>(i + 1);
    p.semi_minor_m = d.sieve_mm / 2000.0;
    p.semi_major_m = p.semi_minor_m * d.aspect;
    p.angle_rad = d.angle;
    p.sieve_mm = d.sieve_mm;
    p.albedo = d.albedo;
    const double reach_px = p.semi_major_m / m_per_px;
    const double span_x = scene.width_px - 1 - 2.0 * reach_px;
    const double span_y = scene.height_px - 1 - 2.0 * reach_px;
    if (span_x < 0.0 || span_y < 0.0) {
      throw Error(ErrorCode::PackingFailure, "particle of " + std::to_string(d.sieve_mm) + " mm does not fit the scene");
    }
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
      p.x_m = (reach_px + span_x * uniform_open01(place_rng)) * m_per_px;
      p.y_m = (reach_px + span_y * uniform_open01(place_rng)) * m_per_px;
      const PixelEllipse e = to_pixels(p, spec.mm_per_px);
      std::size_t inside = 0, taken = 0;
      bool hits_sphere = false;
      for_each_pixel(e, scene.width_px, scene.height_px, [&](int x, int y, double, double) {
        ++inside;
        if (occupied(x, y) != 0) ++taken;
        if (in_sphere(sphere, x, y)) hits_sphere = true;
      });
      if (hits_sphere) continue;
      if (inside > 0 && static_cast<double>(taken) > spec.max_overlap * static_cast<double>(inside)) continue;
      for_each_pixel(e, scene.width_px, scene.height_px, [&](int x, int y, double, double) {
        if (occupied(x, y) == 0) occupied(x, y) = p.id;
      });
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorCode::PackingFailure, "could not place particle " + std::to_string(i + 1) + " of " +
                                                 std::to_string(draws.size()) + " within the overlap bound");
    }
    scene.particles.push_back(p);
  }
  scene.truth_label_map = std::move(occupied);
  scene.truth_distribution = ground_truth_distribution(scene, SieveSeries::default_series());
  return scene;
}

Image<float> evenness_field(int width, int height, double evenness, double azimuth_deg) {
  if (!(evenness >= 0.0 && evenness <= 1.0)) throw Error(ErrorCode::InvalidArgument, "evenness must lie in [0, 1]");
  Image<float> field(width, height, 1.0f);
  const double severity = 1.0 - evenness;
  if (severity <= 0.0) return field;

  const double az = azimuth_deg * kDegToRad;
  const double dir_x = std::cos(az), dir_y = std::sin(az);
  const double cx = 0.5 * (width - 1), cy = 0.5 * (height - 1);
  const double half_diag = 0.5 * std::hypot(width, height);
  const double shadow_half_width = 67.5 * kDegToRad;
  double sum = 0.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double rx = x - cx, ry = y - cy;
      const double ramp = (rx * dir_x + ry * dir_y) / half_diag;
      double value = 1.0 + 0.8 * severity * ramp;
      // Angle between the pixel direction and the anti-source direction.
      const double cos_anti = -(rx * dir_x + ry * dir_y) / std::max(std::hypot(rx, ry), 1e-12);
      if (cos_anti >= std::cos(shadow_half_width)) value *= 1.0 - 0.85 * severity;
      field(x, y) = static_cast<float>(value);
      sum += value;
    }
  }
  const double mean = sum / static_cast<double>(field.size());
  for (auto& v : field.samples()) v = static_cast<float>(v / mean);
  return field;
}

Raster render(const Scene& scene, const LightingCondition& light, const SensorModel& sensor) {
  light.validate();
  sensor.validate();
  const int w = scene.width_px, h = scene.height_px;
  const Image<float> field = evenness_field(w, h, light.evenness, light.source_azimuth_deg);
  const double tilt = light.source_tilt_deg.value_or(0.0) * kDegToRad;
  const double az = light.source_azimuth_deg * kDegToRad;
  const double lx = std::sin(tilt) * std::cos(az), ly = std::sin(tilt) * std::sin(az), lz = std::cos(tilt);

  double radiance = sensor.exposure_gain * light.pile_illuminance_lx;
  if (sensor.auto_exposure) radiance = std::min(radiance, sensor.auto_exposure_white);

  std::vector<PixelEllipse> ellipses;
  ellipses.reserve(scene.particles.size());
  for (const auto& p : scene.particles) ellipses.push_back(to_pixels(p, scene.spec.mm_per_px));
  const auto sphere = sphere_disc(scene.spec);

  // Hard cast shadows: each fragment's silhouette, pushed away from the
  // source by its height times tan(zenith), removes direct light wherever it
  // falls on something else.
  const double severity = 1.0 - light.evenness;
  std::vector<std::uint8_t> shadow;
  if (severity > 0.0) {
    shadow.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
    // The shadow-casting source sits at zenith angle 90 deg * severity.
    const double reach = std::min(std::tan(0.5 * std::numbers::pi * severity), kMaxShadowReach);
    for (std::size_t i = 0; i < ellipses.size(); ++i) {
      PixelEllipse s = ellipses[i];
      s.cx -= std::cos(az) * reach * s.b;
      s.cy -= std::sin(az) * reach * s.b;
      const auto id = static_cast<std::uint16_t>(i + 1);
      for_each_pixel(s, w, h, [&](int x, int y, double, double) {
        if (scene.truth_label_map(x, y) != id) shadow[static_cast<std::size_t>(y) * w + x] = 1;
      });
    }
  }
  auto direct = [&](int x, int y) {
    return !shadow.empty() && shadow[static_cast<std::size_t>(y) * w + x] ? 0.0 : 1.0;
  };

  std::mt19937_64 rng(sensor.rng_seed);
  Raster out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double shading =
          scene.spec.background_albedo * (kAmbient + (1.0 - kAmbient) * std::max(0.0, lz) * direct(x, y));
      const std::uint16_t id = scene.truth_label_map(x, y);
      if (in_sphere(sphere, x, y)) {
        shading = kSphereAlbedo;
      } else if (id != 0) {
        const PixelEllipse& e = ellipses[id - 1];
        const SceneParticle& p = scene.particles[id - 1];
        const double dx = x - e.cx, dy = y - e.cy;
        const double u = dx * e.cos_t + dy * e.sin_t;
        const double v = -dx * e.sin_t + dy * e.cos_t;
        // Ellipsoidal cap with height equal to the minor semi-axis.
        const double rho2 = std::min(1.0, (u * u) / (e.a * e.a) + (v * v) / (e.b * e.b));
        const double z = e.b * std::sqrt(1.0 - rho2);
        const double nu = u / (e.a * e.a), nv = v / (e.b * e.b), nz = z / (e.b * e.b);
        const double nx = nu * e.cos_t - nv * e.sin_t;
        const double ny = nu * e.sin_t + nv * e.cos_t;
        const double norm = std::sqrt(nx * nx + ny * ny + nz * nz);
        const double lambert = norm > 0.0 ? std::max(0.0, (nx * lx + ny * ly + nz * lz) / norm) : 0.0;
        shading = p.albedo * (kAmbient + (1.0 - kAmbient) * lambert * direct(x, y));
      }
      double value = radiance * shading * field(x, y);
      if (sensor.noise_floor_sigma > 0.0) {
        // Read noise is truncated at 3 sigma so a black frame stays at the floor.
        double z = standard_normal(rng);
        while (std::abs(z) >= 3.0) z = standard_normal(rng);
        value += sensor.noise_floor_sigma * z;
      }
      out(x, y) = static_cast<std::uint8_t>(std::clamp(std::round(value), 0.0, sensor.full_well));
    }
  }
  return out;
}

SizeDistribution ground_truth_distribution(const Scene& scene, const SieveSeries& sieves) {
  std::vector<WeightedSize> sizes;
  sizes.reserve(scene.particles.size());
  for (const auto& p : scene.particles) sizes.push_back({p.sieve_mm, 1.0});
  return distribution_from_sizes(sizes, 0.0, sieves, DistributionSource::SieveAnalysis);
}

double illuminance_at_pile(double source_emittance_lux_at_1m, double distance_m, double tilt_deg) {
  if (!(distance_m > 0.0)) throw Error(ErrorCode::DomainError, "distance must be > 0");
  if (!(tilt_deg >= 0.0 && tilt_deg < 90.0)) throw Error(ErrorCode::DomainError, "tilt must lie in [0, 90)");
  return source_emittance_lux_at_1m * std::cos(tilt_deg * kDegToRad) / (distance_m * distance_m);
}

std::pair<int, int> scene_pixels_for_frames(int frame_w, int frame_h, int rows, int cols, int jitter_px) {
  return {cols * frame_w + 2 * jitter_px, rows * frame_h + 2 * jitter_px};
}

std::vector<FrameRect> viewpoint_frames(int scene_w, int scene_h, int frame_w, int frame_h, int rows, int cols,
                                        int jitter_px, std::uint64_t seed) {
  if (rows < 1 || cols < 1 || frame_w < 1 || frame_h < 1 || jitter_px < 0) {
    throw Error(ErrorCode::InvalidArgument, "invalid frame layout");
  }
  const auto [need_w, need_h] = scene_pixels_for_frames(frame_w, frame_h, rows, cols, jitter_px);
  if (scene_w < need_w || scene_h < need_h) throw Error(ErrorCode::InvalidArgument, "scene smaller than frame layout");
  std::mt19937_64 rng(seed);
  std::vector<FrameRect> frames;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      auto jitter = [&] {
        return static_cast<int>(std::floor(uniform_open01(rng) * (2 * jitter_px + 1))) - jitter_px;
      };
      const int jx = jitter();
      const int jy = jitter();
      frames.push_back({jitter_px + c * frame_w + jx, jitter_px + r * frame_h + jy, frame_w, frame_h});
    }
  }
  return frames;
}

std::optional<DetectedCircle> sphere_in_pixels(const Scene& scene) { return sphere_disc(scene.spec); }

}  // namespace granulometer::synthcam
