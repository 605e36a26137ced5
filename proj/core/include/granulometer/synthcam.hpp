#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "granulometer/granulometry.hpp"
#include "granulometer/raster.hpp"
#include "granulometer/swebrec.hpp"

namespace granulometer::synthcam {

/// One row of a lighting table. Emittance and source pose are optional
/// because some recorded conditions have no dedicated source.
struct LightingCondition {
  std::string label;
  double pile_illuminance_lx = 0.0;
  std::optional<double> source_emittance_lx;
  std::optional<double> source_tilt_deg;
  std::optional<double> source_distance_m;
  std::string source_position;  // free text as recorded, e.g. "ceiling, 3 m above pile"
  /// 1 = spatially constant illumination; lower values add a gradient and
  /// hard shadow sectors opposite the source azimuth.
  double evenness = 1.0;
  double source_azimuth_deg = 0.0;

  void validate() const;
};

/// Lab lighting rows (normal, dim, uneven, dark, two artificial setups).
std::vector<LightingCondition> indoor_conditions();
/// Field lighting rows (cloudy, dusk, artificial, dark).
std::vector<LightingCondition> outdoor_conditions();

struct ScaleSphere {
  double diameter_mm = 60.0;
  double x_m = 0.0;  // centre, scene coordinates
  double y_m = 0.0;
};

struct SceneSpec {
  double width_m = 0.0;
  double height_m = 0.0;
  double mm_per_px = 0.25;
  SwebrecParams target{19.0, 6.0, 2.0};
  int particle_count = 0;
  std::uint64_t packing_seed = 0;
  std::optional<ScaleSphere> scale_sphere;
  /// Drawn sizes below this are raised to it (sieve sizes live in (min, x_max]).
  double min_size_mm = 0.5;
  double max_aspect = 1.6;
  /// Largest fraction of a new ellipse that may fall on already placed ones.
  double max_overlap = 0.03;
  int max_attempts = 4000;
  double rock_albedo_min = 0.55;
  double rock_albedo_max = 0.80;
  /// Ground showing between fragments; kept below the ambient-lit rim of
  /// the darkest rock so that particle edges stay monotone.
  double background_albedo = 0.06;

  void validate() const;
};

struct SceneParticle {
  std::uint16_t id = 0;
  double x_m = 0.0;
  double y_m = 0.0;
  double semi_major_m = 0.0;
  double semi_minor_m = 0.0;
  double angle_rad = 0.0;
  double sieve_mm = 0.0;
  double albedo = 0.0;
};

struct Scene {
  SceneSpec spec;
  int width_px = 0;
  int height_px = 0;
  std::vector<SceneParticle> particles;
  /// Visible particle id per pixel (later particles lie underneath).
  LabelMap truth_label_map;
  /// Volume-basis truth on the default sieve series.
  SizeDistribution truth_distribution;
};

struct SensorModel {
  double exposure_gain = 2.0;  // gray levels per lux at full exposure
  double noise_floor_sigma = 0.5;
  double full_well = 255.0;
  std::uint64_t rng_seed = 0;
  /// Bright scenes are exposed down so that a white Lambertian surface
  /// under the pile illuminance reaches at most this level. Dim scenes run
  /// at exposure_gain.
  bool auto_exposure = true;
  double auto_exposure_white = 230.0;

  void validate() const;
};

/// Uniform in the open interval (0, 1), identical on every platform.
double uniform_open01(std::mt19937_64& rng);

/// Standard normal via Box-Muller.
double standard_normal(std::mt19937_64& rng);

/// Inverse-CDF draw of one Swebrec size.
double sample_swebrec(const SwebrecParams& params, std::mt19937_64& rng);

/// Deterministic pile: sizes by inverse-CDF sampling, ellipses placed by
/// dart throwing, largest first. Throws PackingFailure.
Scene generate_pile(const SceneSpec& spec);

/// Rebuilds the truth label map from particle geometry.
LabelMap rasterize_truth(const SceneSpec& spec, int width_px, int height_px,
                         const std::vector<SceneParticle>& particles);

/// Illumination multiplier field with mean 1.
Image<float> evenness_field(int width, int height, double evenness, double azimuth_deg);

/// Lambertian render of the scene through the sensor model.
Raster render(const Scene& scene, const LightingCondition& light, const SensorModel& sensor);

SizeDistribution ground_truth_distribution(const Scene& scene, const SieveSeries& sieves);

/// source_emittance (lux at 1 m) * cos(tilt) / distance^2.
double illuminance_at_pile(double source_emittance_lux_at_1m, double distance_m, double tilt_deg);

struct FrameRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

/// rows x cols frames tiling the scene, each offset by a seeded jitter of
/// at most `jitter_px`. The scene must be at least
/// (cols * frame_w + 2 * jitter) x (rows * frame_h + 2 * jitter).
std::vector<FrameRect> viewpoint_frames(int scene_w, int scene_h, int frame_w, int frame_h, int rows, int cols,
                                        int jitter_px, std::uint64_t seed);

/// Scene size in pixels for a frame grid with jitter margin.
std::pair<int, int> scene_pixels_for_frames(int frame_w, int frame_h, int rows, int cols, int jitter_px);

/// The sphere disc in pixel coordinates, if the scene has one.
std::optional<DetectedCircle> sphere_in_pixels(const Scene& scene);

}  // namespace granulometer::synthcam
