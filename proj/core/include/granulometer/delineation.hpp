#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "granulometer/io.hpp"
#include "granulometer/raster.hpp"

namespace granulometer {

struct Particle {
  std::uint16_t id = 0;
  double area = 0.0;  // px^2
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  double ellipse_major = 0.0;  // px, full axis length from second moments
  double ellipse_minor = 0.0;  // px
  double orientation = 0.0;    // rad, major axis vs +x
  int bbox_width = 0;
  int bbox_height = 0;
  /// Miles-Lantuejoul correction for border-excluded particles, >= 1.
  double edge_weight = 1.0;
};

/// Segmentation result for one raster. Pixels outside the analysis region
/// (background, frame-border particles, excluded scale objects) are 0 in
/// label_map and 0 in analysis_mask; unresolved pixels inside the region
/// are 0 in label_map and 255 in analysis_mask.
struct DelineationNet {
  LabelMap label_map;
  Raster analysis_mask;
  std::vector<Particle> particles;
  std::size_t analysis_region_px = 0;
  std::size_t unresolved_px = 0;
  double unresolved_fraction = 0.0;
  double min_particle_area = 9.0;
};

enum class ScaleMethod { SphereDetect, ManualTrace };

struct DetectedCircle {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;  // px
  double score = 0.0;
};

struct ScaleCalibration {
  double mm_per_px = 0.0;
  ScaleMethod method = ScaleMethod::SphereDetect;
  int n_objects = 0;
  std::vector<DetectedCircle> circles;
};

enum class StretchMode { None, Linear, Percentile };

struct ContrastOptions {
  StretchMode mode = StretchMode::Percentile;
  double low_percentile = 0.5;
  double high_percentile = 99.5;
  /// Gaussian pre-smoothing sigma in px; 0 disables.
  double smoothing_sigma = 1.0;
  /// Upper bound on the stretch gain (<= 0: unbounded). Keeps sensor
  /// noise in a near-black frame from being amplified into contrast.
  double max_gain = 1.5;
};

struct SegmentationParams {
  int min_particle_area = 9;
  /// Gaussian sigma applied before the gradient magnitude.
  double gradient_sigma = 1.0;
  /// Minimum depth (gray levels per px, for a full-range image) for a
  /// gradient minimum to seed a basin; scaled by the robust range / 255.
  double marker_threshold = 2.0;
  /// Marker depth floor in multiples of the estimated noise sigma.
  double marker_noise_factor = 4.0;
  /// Robust (0.5 / 99.5 percentile) range below which LowContrast is thrown.
  double low_contrast_floor = 8.0;
  /// Hand dim-but-not-background pixels of dark basins to the adjacent
  /// fragment.
  bool reclaim_flanks = true;
  /// Basins thinner than this (px, ellipse minor axis) and at least
  /// sliver_elongation times as long are merged into a neighbour; 0 disables.
  double sliver_width_px = 7.0;
  double sliver_elongation = 1.5;
  /// Drop regions touching the frame border and weight the rest.
  bool exclude_border = true;
};

struct SphereDetectOptions {
  double min_radius_px = 20.0;
  double max_radius_px = 200.0;
  /// Candidate threshold as a fraction of the (p1, max) intensity range.
  double brightness_fraction = 0.8;
  /// Edge contrast of the circular template, normalised by the image range.
  double min_score = 0.25;
  double max_aspect = 1.1;
  double min_fill = 0.95;
  /// Share of the disc-to-surround contrast that must fall within +-2 px
  /// of the rim.
  double min_edge_sharpness = 0.5;
};

Raster preprocess(const Raster& raster, const ContrastOptions& options = {});

/// Marker-controlled gradient watershed. Throws LowContrast when the input's
/// robust dynamic range is below params.low_contrast_floor.
DelineationNet segment(const Raster& raster, const SegmentationParams& params = {},
                       std::span<const DetectedCircle> exclusions = {});

/// Finds uniform bright discs and returns mm_per_px = true diameter / mean
/// detected diameter. Throws NoScaleFound when nothing qualifies.
ScaleCalibration detect_scale_spheres(const Raster& raster, double true_diameter_mm,
                                      const SphereDetectOptions& options = {});

/// Calibration from manually traced circles (mean of per-object diameters).
ScaleCalibration calibration_from_annotation(std::span<const io::TracedCircle> circles);

struct QualityReport {
  int fusion = 0;
  int disintegration = 0;
  double boundary_iou = 0.0;
  int predicted_regions = 0;
  int truth_regions = 0;
};

/// Majority-overlap matching of predicted regions against a truth label map
/// (label 0 = no region in both).
QualityReport match_to_truth(const LabelMap& predicted, const LabelMap& truth);

/// Second central moments (with the 1/12 pixel-area term) of a set of
/// pixel coordinates, as ellipse axes.
struct EllipseAxes {
  double major = 0.0;
  double minor = 0.0;
  double orientation = 0.0;
};
EllipseAxes ellipse_from_moments(double n, double sum_x, double sum_y, double sum_xx, double sum_yy, double sum_xy);

/// Value at the given percentile (0..100) of the raster's samples.
double percentile(const Raster& raster, double pct);

}  // namespace granulometer
