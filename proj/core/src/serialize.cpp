#include "granulometer/serialize.hpp"

#include <charconv>
#include <string>

#include "granulometer/error.hpp"
#include "granulometer/io.hpp"

namespace granulometer::serialize {
namespace {

using io::format_number;

double parse_double(const std::string& field, std::size_t line_no) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": not a number: '" + field + "'");
  }
  return v;
}

// Calls fn(fields, line_no) for each data record, skipping blanks, comments
// and a header whose first field matches `header`.
template <typename Fn>
void for_each_record(std::string_view text, std::string_view header, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos || line.front() == '#') continue;
    auto fields = io::split_csv_line(line);
    if (!fields.empty() && fields[0] == header) continue;
    fn(fields, line_no);
    if (end == text.size()) break;
  }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

DistributionSource source_from(const std::string& s) {
  if (s == "image_analysis") return DistributionSource::ImageAnalysis;
  if (s == "sieve_analysis") return DistributionSource::SieveAnalysis;
  if (s == "swebrec_model") return DistributionSource::SwebrecModel;
  throw Error(ErrorCode::ParseError, "unknown distribution source '" + s + "'");
}

DistributionBasis basis_from(const std::string& s) {
  if (s == "volume_proxy") return DistributionBasis::VolumeProxy;
  if (s == "count") return DistributionBasis::Count;
  throw Error(ErrorCode::ParseError, "unknown distribution basis '" + s + "'");
}

}  // namespace

std::string to_string(DistributionSource s) {
  switch (s) {
    case DistributionSource::ImageAnalysis: return "image_analysis";
    case DistributionSource::SieveAnalysis: return "sieve_analysis";
    case DistributionSource::SwebrecModel: return "swebrec_model";
  }
  return "image_analysis";
}

std::string to_string(DistributionBasis b) {
  return b == DistributionBasis::Count ? "count" : "volume_proxy";
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string distribution_csv(const SizeDistribution& d) {
  std::string out = "size_mm,percent_passing\n";
  for (const auto& p : d.points) out += format_number(p.size_mm, 4) + "," + format_number(p.percent_passing, 6) + "\n";
  return out;
}

SizeDistribution parse_distribution_csv(std::string_view text, DistributionSource source) {
  SizeDistribution d;
  d.source = source;
  for_each_record(text, "size_mm", [&](const std::vector<std::string>& f, std::size_t line_no) {
    if (f.size() != 2) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected size_mm,percent_passing");
    }
    const double size = parse_double(f[0], line_no);
    const double pct = parse_double(f[1], line_no);
    if (!(size > 0.0)) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": size must be > 0");
    if (!(pct >= 0.0 && pct <= 100.0)) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": percent outside [0, 100]");
    }
    if (!d.points.empty() && size <= d.points.back().size_mm) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": sizes must be strictly increasing");
    }
    d.points.push_back({size, pct});
  });
  if (!d.is_monotone()) throw Error(ErrorCode::ParseError, "distribution is not monotone");
  return d;
}

std::string residuals_csv(std::span<const ResidualRow> rows) {
  std::string out = "size_mm,p_ia,p_sa,residual_pct\n";
  for (const auto& r : rows) {
    out += format_number(r.size_mm, 4) + "," + format_number(r.p_ia) + "," + format_number(r.p_sa) + "," +
           format_number(r.residual_pct) + "\n";
  }
  return out;
}

json to_json(const SizeDistribution& d) {
  json pts = json::array();
  for (const auto& p : d.points) pts.push_back({{"size_mm", p.size_mm}, {"percent_passing", p.percent_passing}});
  return {{"basis", to_string(d.basis)}, {"source", to_string(d.source)}, {"points", pts}};
}

SizeDistribution distribution_from_json(const json& j) {
  SizeDistribution d;
  d.basis = basis_from(j.value("basis", std::string("volume_proxy")));
  d.source = source_from(j.value("source", std::string("image_analysis")));
  for (const auto& p : j.at("points")) d.points.push_back({p.at("size_mm").get<double>(), p.at("percent_passing").get<double>()});
  return d;
}

json to_json(const SwebrecParams& p) { return {{"x_max_mm", p.x_max}, {"x_50_mm", p.x_50}, {"b", p.b}}; }

SwebrecParams params_from_json(const json& j) {
  SwebrecParams p{j.at("x_max_mm").get<double>(), j.at("x_50_mm").get<double>(), j.at("b").get<double>()};
  if (!p.valid()) throw Error(ErrorCode::ParseError, "invalid Swebrec parameters");
  return p;
}

json to_json(const SwebrecFit& fit) {
  json j = to_json(fit.params);
  j["rms_residual"] = fit.rms_residual;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  return j;
}

SwebrecFit fit_from_json(const json& j) {
  SwebrecFit fit;
  fit.params = params_from_json(j);
  fit.rms_residual = j.value("rms_residual", 0.0);
  fit.converged = j.value("converged", false);
  fit.iterations = j.value("iterations", 0);
  return fit;
}

json to_json(const ResidualReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"size_mm", row.size_mm}, {"p_ia", row.p_ia}, {"p_sa", row.p_sa}, {"residual_pct", row.residual_pct}});
  }
  return {{"rows", rows}, {"two_norm", r.two_norm}, {"envelope_limit", r.envelope_limit}, {"pass", r.pass}};
}

json to_json(const ContrastOptions& o) {
  const char* mode = o.mode == StretchMode::None ? "none" : o.mode == StretchMode::Linear ? "linear" : "percentile";
  return {{"mode", mode},
          {"low_percentile", o.low_percentile},
          {"high_percentile", o.high_percentile},
          {"smoothing_sigma", o.smoothing_sigma},
          {"max_gain", o.max_gain}};
}

ContrastOptions contrast_from_json(const json& j) {
  ContrastOptions o;
  if (j.contains("mode")) {
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "none") {
      o.mode = StretchMode::None;
    } else if (mode == "linear") {
      o.mode = StretchMode::Linear;
    } else if (mode == "percentile") {
      o.mode = StretchMode::Percentile;
    } else {
      throw Error(ErrorCode::ParseError, "unknown contrast mode '" + mode + "'");
    }
  }
  read_opt(j, "low_percentile", o.low_percentile);
  read_opt(j, "high_percentile", o.high_percentile);
  read_opt(j, "smoothing_sigma", o.smoothing_sigma);
  read_opt(j, "max_gain", o.max_gain);
  return o;
}

json to_json(const SegmentationParams& p) {
  return {{"min_particle_area", p.min_particle_area},
          {"gradient_sigma", p.gradient_sigma},
          {"marker_threshold", p.marker_threshold},
          {"marker_noise_factor", p.marker_noise_factor},
          {"low_contrast_floor", p.low_contrast_floor},
          {"reclaim_flanks", p.reclaim_flanks},
          {"sliver_width_px", p.sliver_width_px},
          {"sliver_elongation", p.sliver_elongation},
          {"exclude_border", p.exclude_border}};
}

SegmentationParams segmentation_from_json(const json& j) {
  SegmentationParams p;
  read_opt(j, "min_particle_area", p.min_particle_area);
  read_opt(j, "gradient_sigma", p.gradient_sigma);
  read_opt(j, "marker_threshold", p.marker_threshold);
  read_opt(j, "marker_noise_factor", p.marker_noise_factor);
  read_opt(j, "low_contrast_floor", p.low_contrast_floor);
  read_opt(j, "reclaim_flanks", p.reclaim_flanks);
  read_opt(j, "sliver_width_px", p.sliver_width_px);
  read_opt(j, "sliver_elongation", p.sliver_elongation);
  read_opt(j, "exclude_border", p.exclude_border);
  return p;
}

json to_json(const SphereDetectOptions& o) {
  return {{"min_radius_px", o.min_radius_px},
          {"max_radius_px", o.max_radius_px},
          {"brightness_fraction", o.brightness_fraction},
          {"min_score", o.min_score},
          {"max_aspect", o.max_aspect},
          {"min_fill", o.min_fill},
          {"min_edge_sharpness", o.min_edge_sharpness}};
}

SphereDetectOptions sphere_detect_from_json(const json& j) {
  SphereDetectOptions o;
  read_opt(j, "min_radius_px", o.min_radius_px);
  read_opt(j, "max_radius_px", o.max_radius_px);
  read_opt(j, "brightness_fraction", o.brightness_fraction);
  read_opt(j, "min_score", o.min_score);
  read_opt(j, "max_aspect", o.max_aspect);
  read_opt(j, "min_fill", o.min_fill);
  read_opt(j, "min_edge_sharpness", o.min_edge_sharpness);
  return o;
}

json to_json(const FinesPolicy& f) {
  return {{"kind", f.kind == FinesPolicy::Kind::Ignore ? "ignore" : "below_smallest_sieve"},
          {"thickness_px", f.thickness_px}};
}

FinesPolicy fines_from_json(const json& j) {
  FinesPolicy f;
  if (j.contains("kind")) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "ignore") {
      f.kind = FinesPolicy::Kind::Ignore;
    } else if (kind == "below_smallest_sieve") {
      f.kind = FinesPolicy::Kind::BelowSmallestSieve;
    } else {
      throw Error(ErrorCode::ParseError, "unknown fines policy '" + kind + "'");
    }
  }
  read_opt(j, "thickness_px", f.thickness_px);
  return f;
}

json to_json(const ScaleCalibration& c) {
  json circles = json::array();
  for (const auto& k : c.circles) circles.push_back({{"cx_px", k.cx}, {"cy_px", k.cy}, {"radius_px", k.radius}, {"score", k.score}});
  return {{"mm_per_px", c.mm_per_px},
          {"method", c.method == ScaleMethod::SphereDetect ? "sphere_detect" : "manual_trace"},
          {"n_objects", c.n_objects},
          {"circles", circles}};
}

json to_json(const QualityReport& q) {
  return {{"fusion", q.fusion},
          {"disintegration", q.disintegration},
          {"boundary_iou", q.boundary_iou},
          {"predicted_regions", q.predicted_regions},
          {"truth_regions", q.truth_regions}};
}

json to_json(const synthcam::LightingCondition& c) {
  return {{"label", c.label},
          {"pile_illuminance_lx", c.pile_illuminance_lx},
          {"source_emittance_lx", opt(c.source_emittance_lx)},
          {"source_tilt_deg", opt(c.source_tilt_deg)},
          {"source_distance_m", opt(c.source_distance_m)},
          {"source_position", c.source_position},
          {"evenness", c.evenness},
          {"source_azimuth_deg", c.source_azimuth_deg}};
}

synthcam::LightingCondition lighting_from_json(const json& j) {
  synthcam::LightingCondition c;
  read_opt(j, "label", c.label);
  c.pile_illuminance_lx = j.at("pile_illuminance_lx").get<double>();
  read_opt(j, "source_emittance_lx", c.source_emittance_lx);
  read_opt(j, "source_tilt_deg", c.source_tilt_deg);
  read_opt(j, "source_distance_m", c.source_distance_m);
  read_opt(j, "source_position", c.source_position);
  read_opt(j, "evenness", c.evenness);
  read_opt(j, "source_azimuth_deg", c.source_azimuth_deg);
  c.validate();
  return c;
}

json to_json(const synthcam::SceneSpec& s) {
  json j = {{"width_m", s.width_m},
            {"height_m", s.height_m},
            {"mm_per_px", s.mm_per_px},
            {"target", to_json(s.target)},
            {"particle_count", s.particle_count},
            {"packing_seed", s.packing_seed},
            {"min_size_mm", s.min_size_mm},
            {"max_aspect", s.max_aspect},
            {"max_overlap", s.max_overlap},
            {"max_attempts", s.max_attempts},
            {"rock_albedo_min", s.rock_albedo_min},
            {"rock_albedo_max", s.rock_albedo_max},
            {"background_albedo", s.background_albedo}};
  if (s.scale_sphere) {
    j["scale_sphere"] = {{"diameter_mm", s.scale_sphere->diameter_mm}, {"x_m", s.scale_sphere->x_m}, {"y_m", s.scale_sphere->y_m}};
  } else {
    j["scale_sphere"] = nullptr;
  }
  return j;
}

synthcam::SceneSpec scene_spec_from_json(const json& j) {
  synthcam::SceneSpec s;
  read_opt(j, "width_m", s.width_m);
  read_opt(j, "height_m", s.height_m);
  read_opt(j, "mm_per_px", s.mm_per_px);
  if (j.contains("target")) s.target = params_from_json(j.at("target"));
  read_opt(j, "particle_count", s.particle_count);
  read_opt(j, "packing_seed", s.packing_seed);
  read_opt(j, "min_size_mm", s.min_size_mm);
  read_opt(j, "max_aspect", s.max_aspect);
  read_opt(j, "max_overlap", s.max_overlap);
  read_opt(j, "max_attempts", s.max_attempts);
  read_opt(j, "rock_albedo_min", s.rock_albedo_min);
  read_opt(j, "rock_albedo_max", s.rock_albedo_max);
  read_opt(j, "background_albedo", s.background_albedo);
  if (j.contains("scale_sphere") && !j.at("scale_sphere").is_null()) {
    const json& sp = j.at("scale_sphere");
    synthcam::ScaleSphere sphere;
    read_opt(sp, "diameter_mm", sphere.diameter_mm);
    read_opt(sp, "x_m", sphere.x_m);
    read_opt(sp, "y_m", sphere.y_m);
    s.scale_sphere = sphere;
  }
  return s;
}

json to_json(const synthcam::SensorModel& s) {
  return {{"exposure_gain", s.exposure_gain},   {"noise_floor_sigma", s.noise_floor_sigma},
          {"full_well", s.full_well},           {"rng_seed", s.rng_seed},
          {"auto_exposure", s.auto_exposure}, {"auto_exposure_white", s.auto_exposure_white}};
}

synthcam::SensorModel sensor_from_json(const json& j) {
  synthcam::SensorModel s;
  read_opt(j, "exposure_gain", s.exposure_gain);
  read_opt(j, "noise_floor_sigma", s.noise_floor_sigma);
  read_opt(j, "full_well", s.full_well);
  read_opt(j, "rng_seed", s.rng_seed);
  read_opt(j, "auto_exposure", s.auto_exposure);
  read_opt(j, "auto_exposure_white", s.auto_exposure_white);
  s.validate();
  return s;
}

json to_json(const synthcam::Scene& scene) {
  json particles = json::array();
  for (const auto& p : scene.particles) {
    particles.push_back({{"id", p.id},
                         {"x_m", p.x_m},
                         {"y_m", p.y_m},
                         {"semi_major_m", p.semi_major_m},
                         {"semi_minor_m", p.semi_minor_m},
                         {"angle_rad", p.angle_rad},
                         {"sieve_mm", p.sieve_mm},
                         {"albedo", p.albedo}});
  }
  return {{"spec", to_json(scene.spec)},
          {"width_px", scene.width_px},
          {"height_px", scene.height_px},
          {"truth_distribution", to_json(scene.truth_distribution)},
          {"particles", particles}};
}

synthcam::Scene scene_from_json(const json& j) {
  synthcam::Scene scene;
  scene.spec = scene_spec_from_json(j.at("spec"));
  scene.width_px = j.at("width_px").get<int>();
  scene.height_px = j.at("height_px").get<int>();
  for (const auto& p : j.at("particles")) {
    synthcam::SceneParticle sp;
    sp.id = p.at("id").get<std::uint16_t>();
    sp.x_m = p.at("x_m").get<double>();
    sp.y_m = p.at("y_m").get<double>();
    sp.semi_major_m = p.at("semi_major_m").get<double>();
    sp.semi_minor_m = p.at("semi_minor_m").get<double>();
    sp.angle_rad = p.at("angle_rad").get<double>();
    sp.sieve_mm = p.at("sieve_mm").get<double>();
    sp.albedo = p.at("albedo").get<double>();
    if (sp.id != scene.particles.size() + 1) throw Error(ErrorCode::ParseError, "particle ids must be 1..n in order");
    scene.particles.push_back(sp);
  }
  scene.truth_label_map = synthcam::rasterize_truth(scene.spec, scene.width_px, scene.height_px, scene.particles);
  scene.truth_distribution = synthcam::ground_truth_distribution(scene, SieveSeries::default_series());
  return scene;
}

std::string plan_csv(const missionplan::FlightPlan& plan) {
  std::string out = "idx,x_m,y_m,z_m,tilt_deg\n";
  for (std::size_t i = 0; i < plan.waypoints.size(); ++i) {
    const auto& w = plan.waypoints[i];
    out += std::to_string(i) + "," + format_number(w.x_m) + "," + format_number(w.y_m) + "," + format_number(w.z_m) +
           "," + format_number(w.tilt_deg, 3) + "\n";
  }
  return out;
}

json to_json(const missionplan::FlightPlan& plan) {
  json wps = json::array();
  for (std::size_t i = 0; i < plan.waypoints.size(); ++i) {
    const auto& w = plan.waypoints[i];
    json fp = json::array();
    for (const auto& p : plan.footprints[i]) fp.push_back({p.x, p.y});
    wps.push_back({{"idx", i}, {"x_m", w.x_m}, {"y_m", w.y_m}, {"z_m", w.z_m}, {"tilt_deg", w.tilt_deg}, {"footprint", fp}});
  }
  json poly = json::array();
  for (const auto& p : plan.pile_polygon) poly.push_back({p.x, p.y});
  return {{"waypoints", wps}, {"pile_polygon", poly}, {"max_overlap", plan.max_overlap}, {"coverage", plan.coverage}};
}

json to_json(const missionplan::CameraModel& cam) {
  return {{"h_fov_deg", cam.h_fov_deg},
          {"v_fov_deg", cam.v_fov_deg},
          {"width_px", cam.width_px},
          {"height_px", cam.height_px},
          {"max_tilt_deg", cam.max_tilt_deg}};
}

missionplan::CameraModel camera_from_json(const json& j) {
  missionplan::CameraModel cam;
  read_opt(j, "h_fov_deg", cam.h_fov_deg);
  read_opt(j, "v_fov_deg", cam.v_fov_deg);
  read_opt(j, "width_px", cam.width_px);
  read_opt(j, "height_px", cam.height_px);
  read_opt(j, "max_tilt_deg", cam.max_tilt_deg);
  cam.validate();
  return cam;
}

missionplan::Polygon parse_polygon_csv(std::string_view text) {
  missionplan::Polygon poly;
  for_each_record(text, "x_m", [&](const std::vector<std::string>& f, std::size_t line_no) {
    if (f.size() != 2) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected x_m,y_m");
    poly.push_back({parse_double(f[0], line_no), parse_double(f[1], line_no)});
  });
  return poly;
}

}  // namespace granulometer::serialize
