#include <gtest/gtest.h>

#include "granulometer/error.hpp"
#include "granulometer/serialize.hpp"

namespace granulometer::serialize {
namespace {

TEST(Serialize, DistributionCsvRoundTrip) {
  SizeDistribution d;
  d.source = DistributionSource::SieveAnalysis;
  d.points = {{2.0, 3.25}, {4.0, 17.5}, {19.0, 100.0}};
  const SizeDistribution back = parse_distribution_csv(distribution_csv(d));
  ASSERT_EQ(back.points.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(back.points[i].size_mm, d.points[i].size_mm);
    EXPECT_DOUBLE_EQ(back.points[i].percent_passing, d.points[i].percent_passing);
  }
  EXPECT_EQ(distribution_csv(back), distribution_csv(d));
}

TEST(Serialize, DistributionCsvErrorsCarryLine) {
  try {
    parse_distribution_csv("size_mm,percent_passing\n2,10\nfour,20\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
  }
}

TEST(Serialize, DistributionJsonRoundTrip) {
  SizeDistribution d;
  d.basis = DistributionBasis::Count;
  d.source = DistributionSource::SwebrecModel;
  d.points = {{1.0, 0.0}, {8.0, 55.5}};
  const SizeDistribution back = distribution_from_json(to_json(d));
  EXPECT_EQ(back.basis, d.basis);
  EXPECT_EQ(back.source, d.source);
  EXPECT_EQ(dump(to_json(back)), dump(to_json(d)));
}

TEST(Serialize, SwebrecRoundTrips) {
  const SwebrecParams p{19.0, 6.0, 2.0};
  EXPECT_EQ(params_from_json(to_json(p)), p);
  SwebrecFit fit;
  fit.params = p;
  fit.rms_residual = 1.5e-3;
  fit.converged = true;
  const SwebrecFit back = fit_from_json(to_json(fit));
  EXPECT_EQ(back.params, p);
  EXPECT_DOUBLE_EQ(back.rms_residual, fit.rms_residual);
  EXPECT_TRUE(back.converged);
  const json j = to_json(fit);
  for (const char* key : {"x_max_mm", "x_50_mm", "b", "rms_residual", "converged"}) EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Serialize, OptionRoundTrips) {
  SegmentationParams s;
  s.min_particle_area = 25;
  s.sliver_width_px = 0.0;
  EXPECT_EQ(dump(to_json(segmentation_from_json(to_json(s)))), dump(to_json(s)));
  ContrastOptions c;
  c.mode = StretchMode::Linear;
  EXPECT_EQ(contrast_from_json(to_json(c)).mode, StretchMode::Linear);
  FinesPolicy f;
  f.kind = FinesPolicy::Kind::Ignore;
  EXPECT_EQ(fines_from_json(to_json(f)).kind, FinesPolicy::Kind::Ignore);
  SphereDetectOptions o;
  o.min_radius_px = 33.0;
  EXPECT_DOUBLE_EQ(sphere_detect_from_json(to_json(o)).min_radius_px, 33.0);
}

TEST(Serialize, SynthRoundTrips) {
  synthcam::LightingCondition c = synthcam::indoor_conditions()[2];
  EXPECT_EQ(dump(to_json(lighting_from_json(to_json(c)))), dump(to_json(c)));
  synthcam::SensorModel sensor;
  sensor.rng_seed = 1234567890123ULL;
  EXPECT_EQ(sensor_from_json(to_json(sensor)).rng_seed, sensor.rng_seed);

  synthcam::SceneSpec spec;
  spec.width_m = 0.2;
  spec.height_m = 0.15;
  spec.particle_count = 60;
  spec.packing_seed = 8;
  spec.scale_sphere = synthcam::ScaleSphere{60.0, 0.1, 0.075};
  const synthcam::Scene scene = synthcam::generate_pile(spec);
  const synthcam::Scene back = scene_from_json(to_json(scene));
  EXPECT_EQ(back.truth_label_map, scene.truth_label_map);
  EXPECT_EQ(dump(to_json(back)), dump(to_json(scene)));
}

TEST(Serialize, MissingKeysKeepDefaults) {
  const synthcam::SceneSpec spec = scene_spec_from_json(json::parse(R"({"particle_count": 12})"));
  EXPECT_EQ(spec.particle_count, 12);
  EXPECT_DOUBLE_EQ(spec.mm_per_px, synthcam::SceneSpec{}.mm_per_px);
}

TEST(Serialize, PlanAndPolygon) {
  const auto poly = parse_polygon_csv("# pile\nx_m,y_m\n0,0\n2,0\n2,2\n0,2\n");
  ASSERT_EQ(poly.size(), 4u);
  EXPECT_EQ(poly[2], (missionplan::Point2{2, 2}));
  EXPECT_THROW(parse_polygon_csv("0,0\n1\n"), Error);
  const auto plan = missionplan::plan_flight(poly, {});
  const std::string csv = plan_csv(plan);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);
  EXPECT_EQ(csv.rfind("idx,x_m,y_m,z_m,tilt_deg", 0), 0u);
  missionplan::CameraModel cam;
  cam.h_fov_deg = 70.0;
  EXPECT_DOUBLE_EQ(camera_from_json(to_json(cam)).h_fov_deg, 70.0);
}

TEST(Serialize, DumpIsStable) {
  const json j = json::parse(R"({"b": 1, "a": [1, 2.5]})");
  EXPECT_EQ(dump(j), dump(json::parse(dump(j))));
  EXPECT_EQ(dump(j).back(), '\n');
}

}  // namespace
}  // namespace granulometer::serialize
