#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "granulometer/granulometry.hpp"
#include "granulometer/missionplan.hpp"
#include "granulometer/swebrec.hpp"
#include "granulometer/synthcam.hpp"

namespace granulometer::serialize {

using nlohmann::json;

// CSV: size_mm,percent_passing
std::string distribution_csv(const SizeDistribution& d);
/// Throws ParseError with the offending line number.
SizeDistribution parse_distribution_csv(std::string_view text,
                                        DistributionSource source = DistributionSource::SieveAnalysis);

// CSV: size_mm,p_ia,p_sa,residual_pct
std::string residuals_csv(std::span<const ResidualRow> rows);

json to_json(const SizeDistribution& d);
SizeDistribution distribution_from_json(const json& j);

json to_json(const SwebrecParams& p);
SwebrecParams params_from_json(const json& j);

/// {x_max_mm, x_50_mm, b, rms_residual, converged}
json to_json(const SwebrecFit& fit);
SwebrecFit fit_from_json(const json& j);

json to_json(const ResidualReport& r);

json to_json(const ContrastOptions& o);
ContrastOptions contrast_from_json(const json& j);
json to_json(const SegmentationParams& p);
SegmentationParams segmentation_from_json(const json& j);
json to_json(const SphereDetectOptions& o);
SphereDetectOptions sphere_detect_from_json(const json& j);
json to_json(const FinesPolicy& f);
FinesPolicy fines_from_json(const json& j);
json to_json(const ScaleCalibration& c);
json to_json(const QualityReport& q);

json to_json(const synthcam::LightingCondition& c);
synthcam::LightingCondition lighting_from_json(const json& j);

json to_json(const synthcam::SceneSpec& s);
/// Missing keys keep their defaults.
synthcam::SceneSpec scene_spec_from_json(const json& j);

json to_json(const synthcam::SensorModel& s);
synthcam::SensorModel sensor_from_json(const json& j);

/// Geometry and seeds only; the truth map is rebuilt on load.
json to_json(const synthcam::Scene& scene);
synthcam::Scene scene_from_json(const json& j);

// CSV: idx,x_m,y_m,z_m,tilt_deg
std::string plan_csv(const missionplan::FlightPlan& plan);
json to_json(const missionplan::FlightPlan& plan);
json to_json(const missionplan::CameraModel& cam);
missionplan::CameraModel camera_from_json(const json& j);

/// Polygon CSV with `x_m,y_m` records; '#' comments and a header allowed.
missionplan::Polygon parse_polygon_csv(std::string_view text);

std::string to_string(DistributionSource s);
std::string to_string(DistributionBasis b);

/// Stable pretty-printed text with a trailing newline.
std::string dump(const json& j);

}  // namespace granulometer::serialize
