#pragma once

#include <array>
#include <vector>

namespace granulometer::missionplan {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

using Polygon = std::vector<Point2>;
using Quad = std::array<Point2, 4>;

struct CameraModel {
  double h_fov_deg = 56.0;
  double v_fov_deg = 43.0;
  int width_px = 856;
  int height_px = 480;
  double max_tilt_deg = 83.0;

  void validate() const;
};

/// Camera pose above the pile plane z = 0. Tilt is the depression angle of
/// the optical axis below the horizon (90 = nadir); the camera faces +y.
struct Waypoint {
  double x_m = 0.0;
  double y_m = 0.0;
  double z_m = 0.0;
  double tilt_deg = 0.0;
};

struct PlanOptions {
  double altitude_m = 0.5;
  double tilt_deg = 83.0;
  double overlap_budget = 0.10;
  /// Fraction of the pile area the union of footprints must at least see.
  double min_coverage = 0.25;
  int rows = 3;
  int cols = 3;
};

struct FlightPlan {
  std::vector<Waypoint> waypoints;
  std::vector<Quad> footprints;
  Polygon pile_polygon;
  double max_overlap = 0.0;
  double coverage = 0.0;
};

/// Throws TiltExceedsLimit, PolygonDegenerate or CoverageInfeasible.
FlightPlan plan_flight(const Polygon& pile, const CameraModel& cam, const PlanOptions& options = {});

/// Ground quadrilateral seen by the camera, counter-clockwise starting at
/// the near-left corner. Throws DomainError when a corner ray misses the ground.
Quad footprint(const CameraModel& cam, const Waypoint& wp);

/// area(a ∩ b) / min(area(a), area(b)) for convex quadrilaterals.
double overlap_fraction(const Quad& a, const Quad& b);

/// mm per pixel across the image width at the given distance.
double ground_sample_distance(const CameraModel& cam, double distance_m);

double polygon_area(const Polygon& poly);  // unsigned
double signed_area(const Polygon& poly);
/// Sutherland-Hodgman clip of `subject` by the convex polygon `clip`.
Polygon clip_convex(const Polygon& subject, const Polygon& clip);

}  // namespace granulometer::missionplan
