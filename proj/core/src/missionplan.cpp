#include "granulometer/missionplan.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "granulometer/error.hpp"

namespace granulometer::missionplan {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

Polygon to_polygon(const Quad& q) { return Polygon(q.begin(), q.end()); }

Polygon counter_clockwise(Polygon p) {
  if (signed_area(p) < 0.0) std::reverse(p.begin(), p.end());
  return p;
}

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

Point2 intersect(const Point2& p, const Point2& q, const Point2& a, const Point2& b) {
  const double d1 = cross(a, b, p);
  const double d2 = cross(a, b, q);
  const double t = d1 / (d1 - d2);
  return {p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
}

void check_polygon(const Polygon& pile) {
  if (pile.size() < 3) throw Error(ErrorCode::PolygonDegenerate, "pile polygon needs at least 3 vertices");
  for (const auto& p : pile) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(ErrorCode::PolygonDegenerate, "non-finite vertex");
  }
  double extent = 0.0;
  for (const auto& p : pile) extent = std::max({extent, std::abs(p.x - pile[0].x), std::abs(p.y - pile[0].y)});
  if (extent == 0.0 || polygon_area(pile) <= 1e-12 * extent * extent) {
    throw Error(ErrorCode::PolygonDegenerate, "pile polygon has zero area");
  }
}

double max_pairwise_overlap(const std::vector<Quad>& quads) {
  double worst = 0.0;
  for (std::size_t i = 0; i < quads.size(); ++i) {
    for (std::size_t j = i + 1; j < quads.size(); ++j) worst = std::max(worst, overlap_fraction(quads[i], quads[j]));
  }
  return worst;
}

}  // namespace

void CameraModel::validate() const {
  if (!(h_fov_deg > 0.0 && h_fov_deg < 180.0) || !(v_fov_deg > 0.0 && v_fov_deg < 180.0)) {
    throw Error(ErrorCode::InvalidArgument, "field of view must lie in (0, 180)");
  }
  if (width_px < 1 || height_px < 1) throw Error(ErrorCode::InvalidArgument, "sensor size must be positive");
  if (!(max_tilt_deg > 0.0 && max_tilt_deg <= 90.0)) throw Error(ErrorCode::InvalidArgument, "max_tilt must lie in (0, 90]");
}

double signed_area(const Polygon& poly) {
  double sum = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[(i + 1) % n];
    sum += a.x * b.y - b.x * a.y;
  }
  return 0.5 * sum;
}

double polygon_area(const Polygon& poly) { return std::abs(signed_area(poly)); }

Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  const Polygon cw = counter_clockwise(clip);
  Polygon out = subject;
  for (std::size_t i = 0, n = cw.size(); i < n && !out.empty(); ++i) {
    const Point2& a = cw[i];
    const Point2& b = cw[(i + 1) % n];
    Polygon in = std::move(out);
    out.clear();
    for (std::size_t k = 0, m = in.size(); k < m; ++k) {
      const Point2& p = in[k];
      const Point2& q = in[(k + 1) % m];
      const bool p_in = cross(a, b, p) >= 0.0;
      const bool q_in = cross(a, b, q) >= 0.0;
      if (p_in) out.push_back(p);
      if (p_in != q_in) out.push_back(intersect(p, q, a, b));
    }
  }
  return out;
}

Quad footprint(const CameraModel& cam, const Waypoint& wp) {
  cam.validate();
  if (!(wp.z_m > 0.0)) throw Error(ErrorCode::DomainError, "camera must be above the ground plane");
  const double t = wp.tilt_deg * kDegToRad;
  // forward, right and up axes of the camera
  const double fy = std::cos(t), fz = -std::sin(t);
  const double uy = std::sin(t), uz = std::cos(t);
  const double th = std::tan(cam.h_fov_deg * kDegToRad / 2.0);
  const double tv = std::tan(cam.v_fov_deg * kDegToRad / 2.0);
  constexpr std::array<std::array<double, 2>, 4> kCorners{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
  Quad q;
  for (std::size_t i = 0; i < 4; ++i) {
    const double sx = kCorners[i][0], sy = kCorners[i][1];
    const double dx = sx * th;
    const double dy = fy + sy * tv * uy;
    const double dz = fz + sy * tv * uz;
    if (!(dz < 0.0)) throw Error(ErrorCode::DomainError, "frustum ray does not reach the ground plane");
    const double s = -wp.z_m / dz;
    q[i] = {wp.x_m + s * dx, wp.y_m + s * dy};
  }
  return q;
}

double overlap_fraction(const Quad& a, const Quad& b) {
  const double area_a = polygon_area(to_polygon(a));
  const double area_b = polygon_area(to_polygon(b));
  const double smaller = std::min(area_a, area_b);
  if (!(smaller > 0.0)) return 0.0;
  const double inter = polygon_area(clip_convex(to_polygon(a), to_polygon(b)));
  return std::clamp(inter / smaller, 0.0, 1.0);
}

double ground_sample_distance(const CameraModel& cam, double distance_m) {
  if (!(distance_m > 0.0)) throw Error(ErrorCode::DomainError, "distance must be > 0");
  return 2.0 * distance_m * std::tan(cam.h_fov_deg * kDegToRad / 2.0) / cam.width_px * 1000.0;
}

FlightPlan plan_flight(const Polygon& pile, const CameraModel& cam, const PlanOptions& options) {
  cam.validate();
  if (options.tilt_deg > cam.max_tilt_deg) {
    throw Error(ErrorCode::TiltExceedsLimit, "requested tilt " + std::to_string(options.tilt_deg) +
                                                 " deg exceeds camera limit " + std::to_string(cam.max_tilt_deg));
  }
  if (!(options.tilt_deg > 0.0)) throw Error(ErrorCode::InvalidArgument, "tilt must be > 0");
  if (!(options.altitude_m > 0.0)) throw Error(ErrorCode::InvalidArgument, "altitude must be > 0");
  if (options.rows < 1 || options.cols < 1) throw Error(ErrorCode::InvalidArgument, "grid must be at least 1x1");
  check_polygon(pile);

  double min_x = pile[0].x, max_x = pile[0].x, min_y = pile[0].y, max_y = pile[0].y;
  for (const auto& p : pile) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double cx = 0.5 * (min_x + max_x), cy = 0.5 * (min_y + max_y);

  // Footprint shape relative to the waypoint; waypoints are shifted so that
  // footprint centroids land on the grid cell centres.
  const Quad base = footprint(cam, {0.0, 0.0, options.altitude_m, options.tilt_deg});
  double ox = 0.0, oy = 0.0;
  for (const auto& p : base) {
    ox += p.x / 4.0;
    oy += p.y / 4.0;
  }
  double fp_w = 0.0, fp_h = 0.0;
  for (const auto& p : base) {
    fp_w = std::max(fp_w, std::abs(p.x - ox) * 2.0);
    fp_h = std::max(fp_h, std::abs(p.y - oy) * 2.0);
  }

  const double cell_w = (max_x - min_x) / options.cols;
  const double cell_h = (max_y - min_y) / options.rows;

  auto layout = [&](double pitch_x, double pitch_y) {
    FlightPlan plan;
    plan.pile_polygon = pile;
    for (int r = 0; r < options.rows; ++r) {
      for (int c = 0; c < options.cols; ++c) {
        const double tx = cx + (c - 0.5 * (options.cols - 1)) * pitch_x;
        const double ty = cy + (r - 0.5 * (options.rows - 1)) * pitch_y;
        Waypoint wp{tx - ox, ty - oy, options.altitude_m, options.tilt_deg};
        plan.waypoints.push_back(wp);
        plan.footprints.push_back(footprint(cam, wp));
      }
    }
    plan.max_overlap = max_pairwise_overlap(plan.footprints);
    return plan;
  };

  FlightPlan plan = layout(cell_w, cell_h);
  if (plan.max_overlap > options.overlap_budget) {
    // Spread the grid: pitches grow to at least the footprint size, then a
    // bisection on a common scale finds the tightest admissible layout.
    const double px = std::max(cell_w, 1e-9), py = std::max(cell_h, 1e-9);
    double lo = 1.0;
    double hi = std::max({2.0, 2.0 * fp_w / px, 2.0 * fp_h / py});
    while (layout(hi * px, hi * py).max_overlap > options.overlap_budget) hi *= 2.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (layout(mid * px, mid * py).max_overlap > options.overlap_budget) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    plan = layout(hi * px, hi * py);
  }

  double seen = 0.0;
  for (const auto& q : plan.footprints) {
    const double part = polygon_area(clip_convex(pile, to_polygon(q)));
    if (!(part > 0.0)) {
      throw Error(ErrorCode::CoverageInfeasible,
                  "pile too small for a non-overlapping 3x3 grid at this altitude: a footprint misses the pile");
    }
    seen += part;
  }
  plan.coverage = seen / polygon_area(pile);
  if (plan.coverage < options.min_coverage) {
    throw Error(ErrorCode::CoverageInfeasible, "pile too large for the footprint grid at this altitude: coverage " +
                                                   std::to_string(plan.coverage) + " below " +
                                                   std::to_string(options.min_coverage));
  }
  return plan;
}

}  // namespace granulometer::missionplan
