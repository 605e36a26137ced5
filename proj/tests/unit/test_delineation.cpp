#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "granulometer/delineation.hpp"
#include "granulometer/synthcam.hpp"
#include "test_support.hpp"

namespace granulometer {
namespace {

ContrastOptions linear_only() {
  ContrastOptions o;
  o.mode = StretchMode::Linear;
  o.smoothing_sigma = 0.0;
  o.max_gain = 0.0;
  return o;
}

Raster two_discs() {
  Raster r(160, 100, std::uint8_t{0});
  testing::paint_disc<std::uint8_t>(r, 45, 50, 20, 200);
  testing::paint_disc<std::uint8_t>(r, 115, 50, 20, 200);
  return r;
}

TEST(Preprocess, ConstantStaysConstant) {
  const Raster out = preprocess(Raster(9, 7, std::uint8_t{7}), linear_only());
  EXPECT_TRUE(std::all_of(out.samples().begin(), out.samples().end(), [&](auto v) { return v == out[0]; }));
  const Raster def = preprocess(Raster(9, 7, std::uint8_t{7}));
  EXPECT_TRUE(std::all_of(def.samples().begin(), def.samples().end(), [&](auto v) { return v == def[0]; }));
}

TEST(Preprocess, LinearEndpoints) {
  Raster r(4, 4, std::uint8_t{75});
  r(0, 0) = 50;
  r(3, 3) = 100;
  const Raster out = preprocess(r, linear_only());
  const auto [lo, hi] = std::minmax_element(out.samples().begin(), out.samples().end());
  EXPECT_EQ(*lo, 0);
  EXPECT_EQ(*hi, 255);
}

TEST(Preprocess, FourPixelHandStretch) {
  const Raster r(4, 1, std::vector<std::uint8_t>{10, 20, 30, 40});
  const Raster out = preprocess(r, linear_only());
  // (v - 10) * 255 / 30
  EXPECT_EQ(out, Raster(4, 1, std::vector<std::uint8_t>{0, 85, 170, 255}));
}

TEST(Preprocess, GainCapLimitsStretch) {
  const Raster r(4, 1, std::vector<std::uint8_t>{10, 20, 30, 40});
  ContrastOptions o = linear_only();
  o.max_gain = 1.5;
  const Raster out = preprocess(r, o);
  EXPECT_LE(out[3] - out[0], 46);
  EXPECT_EQ(out.width(), 4);
}

TEST(Preprocess, RangeAndShapeProperty) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Raster r = testing::random_raster(20, 11, seed);
    const Raster out = preprocess(r);
    EXPECT_TRUE(out.same_shape(r));
  }
}

TEST(Segment, TwoSeparateDiscs) {
  const DelineationNet net = segment(preprocess(two_discs()));
  ASSERT_EQ(net.particles.size(), 2u);
  LabelMap truth(160, 100, std::uint16_t{0});
  testing::paint_disc<std::uint16_t>(truth, 45, 50, 20, 1);
  testing::paint_disc<std::uint16_t>(truth, 115, 50, 20, 2);
  const QualityReport q = match_to_truth(net.label_map, truth);
  EXPECT_EQ(q.fusion, 0);
  EXPECT_EQ(q.disintegration, 0);
  for (const auto& p : net.particles) EXPECT_NEAR(p.ellipse_minor, 40.0, 2.0);
}

TEST(Segment, UniformBlackIsLowContrast) {
  try {
    segment(preprocess(Raster(64, 48, std::uint8_t{0})));
    FAIL() << "expected LowContrast";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LowContrast);
  }
}

TEST(Segment, LabelsAndAreasAreConsistent) {
  const DelineationNet net = segment(preprocess(two_discs()));
  std::set<std::uint16_t> ids{0};
  for (const auto& p : net.particles) ids.insert(p.id);
  std::set<std::uint16_t> seen;
  for (auto v : net.label_map.samples()) seen.insert(v);
  seen.insert(0);
  EXPECT_EQ(seen, ids);
  double area = 0.0;
  for (const auto& p : net.particles) area += p.area;
  EXPECT_NEAR(area, static_cast<double>(net.analysis_region_px) * (1.0 - net.unresolved_fraction), 1e-6);
}

TEST(Segment, Deterministic) {
  const Raster img = preprocess(two_discs());
  const DelineationNet a = segment(img), b = segment(img);
  EXPECT_EQ(a.label_map, b.label_map);
  ASSERT_EQ(a.particles.size(), b.particles.size());
  for (std::size_t i = 0; i < a.particles.size(); ++i) EXPECT_EQ(a.particles[i].area, b.particles[i].area);
}

TEST(Segment, ExcludedCircleIsNotAParticle) {
  Raster r = two_discs();
  const DetectedCircle sphere{115, 50, 21, 1};
  const DelineationNet net = segment(preprocess(r), {}, std::span<const DetectedCircle>(&sphere, 1));
  ASSERT_EQ(net.particles.size(), 1u);
  EXPECT_NEAR(net.particles[0].centroid_x, 45.0, 1.0);
}

// Render fixture shared by the synthcam-backed checks below.
struct RenderedFrame {
  Raster image;
  LabelMap truth;
};

RenderedFrame render_frame(double lux, std::uint64_t seed) {
  synthcam::SceneSpec spec;
  spec.width_m = 640 * 0.25 / 1000.0;
  spec.height_m = 400 * 0.25 / 1000.0;
  spec.particle_count = 120;
  spec.packing_seed = seed;
  const synthcam::Scene scene = synthcam::generate_pile(spec);
  synthcam::LightingCondition light;
  light.pile_illuminance_lx = lux;
  synthcam::SensorModel sensor;
  sensor.rng_seed = seed + 1;
  return {synthcam::render(scene, light, sensor), scene.truth_label_map};
}

TEST(Segment, ParticleCountTracksGroundTruth) {
  const RenderedFrame f = render_frame(450.0, 11);
  const DelineationNet net = segment(preprocess(f.image));
  // Oracle: truth regions that the border rule keeps and that are big enough to count.
  std::map<std::uint16_t, int> area;
  std::set<std::uint16_t> on_border;
  for (int y = 0; y < f.truth.height(); ++y) {
    for (int x = 0; x < f.truth.width(); ++x) {
      const auto t = f.truth(x, y);
      if (t == 0) continue;
      ++area[t];
      if (x == 0 || y == 0 || x == f.truth.width() - 1 || y == f.truth.height() - 1) on_border.insert(t);
    }
  }
  int expected = 0;
  for (auto [t, a] : area) expected += !on_border.count(t) && a >= net.min_particle_area;
  ASSERT_GT(expected, 50);
  EXPECT_NEAR(static_cast<double>(net.particles.size()), expected, 0.2 * expected);
}

TEST(Segment, BrighterEvenLightDelineatesAtLeastAsWell) {
  for (std::uint64_t seed : {3u, 4u}) {
    const RenderedFrame bright = render_frame(450.0, seed);
    const RenderedFrame dim = render_frame(5.0, seed);
    const double iou_bright = match_to_truth(segment(preprocess(bright.image)).label_map, bright.truth).boundary_iou;
    const double iou_dim = match_to_truth(segment(preprocess(dim.image)).label_map, dim.truth).boundary_iou;
    EXPECT_GE(iou_bright, iou_dim) << "seed " << seed;
  }
}

TEST(SphereDetect, SingleDisc) {
  Raster r(400, 300, std::uint8_t{20});
  testing::paint_disc<std::uint8_t>(r, 200, 150, 60, 240);
  const ScaleCalibration cal = detect_scale_spheres(r, 60.0);
  EXPECT_EQ(cal.n_objects, 1);
  EXPECT_NEAR(cal.mm_per_px, 0.5, 0.005);
  EXPECT_EQ(cal.method, ScaleMethod::SphereDetect);
}

TEST(SphereDetect, BlankRasterHasNoScale) {
  try {
    detect_scale_spheres(Raster(200, 200, std::uint8_t{0}), 60.0);
    FAIL() << "expected NoScaleFound";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoScaleFound);
  }
}

TEST(SphereDetect, TwoDiscsUseMeanDiameter) {
  Raster r(500, 300, std::uint8_t{20});
  testing::paint_disc<std::uint8_t>(r, 130, 150, 50, 240);
  testing::paint_disc<std::uint8_t>(r, 350, 150, 60, 240);
  const ScaleCalibration cal = detect_scale_spheres(r, 60.0);
  EXPECT_EQ(cal.n_objects, 2);
  EXPECT_NEAR(cal.mm_per_px, 60.0 / 110.0, 0.005);
}

TEST(SphereDetect, InvariantToBrightnessScaling) {
  Raster r(400, 300, std::uint8_t{20});
  testing::paint_disc<std::uint8_t>(r, 190, 140, 45, 240);
  const double base = detect_scale_spheres(r, 60.0).mm_per_px;
  for (double k : {0.5, 0.25}) {
    Raster s = r;
    for (auto& v : s.samples()) v = static_cast<std::uint8_t>(std::lround(v * k));
    EXPECT_NEAR(detect_scale_spheres(s, 60.0).mm_per_px, base, 1e-9) << k;
  }
}

TEST(SphereDetect, RenderedSphereRecoversScale) {
  synthcam::SceneSpec spec;
  spec.width_m = spec.height_m = 0.12;
  spec.particle_count = 60;
  spec.packing_seed = 8;
  spec.scale_sphere = synthcam::ScaleSphere{60.0, 0.06, 0.06};
  const synthcam::Scene scene = synthcam::generate_pile(spec);
  synthcam::LightingCondition light;
  light.pile_illuminance_lx = 450.0;
  const ScaleCalibration cal = detect_scale_spheres(synthcam::render(scene, light, {}), 60.0);
  EXPECT_NEAR(cal.mm_per_px, 0.25, 0.0025);
}

TEST(Annotation, MeanDiameterCalibration) {
  const std::vector<io::TracedCircle> circles{{0, 0, 50, 60}, {0, 0, 60, 60}};
  const ScaleCalibration cal = calibration_from_annotation(circles);
  EXPECT_NEAR(cal.mm_per_px, 60.0 / 110.0, 1e-12);
  EXPECT_EQ(cal.method, ScaleMethod::ManualTrace);
  EXPECT_EQ(cal.n_objects, 2);
}

TEST(MatchToTruth, Identity) {
  LabelMap t(50, 30, std::uint16_t{0});
  testing::paint_disc<std::uint16_t>(t, 12, 15, 8, 1);
  testing::paint_disc<std::uint16_t>(t, 35, 15, 8, 2);
  const QualityReport q = match_to_truth(t, t);
  EXPECT_EQ(q.fusion, 0);
  EXPECT_EQ(q.disintegration, 0);
  EXPECT_DOUBLE_EQ(q.boundary_iou, 1.0);
  EXPECT_EQ(q.truth_regions, 2);
}

TEST(MatchToTruth, OneRegionOverTwoTruthsIsFusion) {
  LabelMap t(40, 20, std::uint16_t{0}), p(40, 20, std::uint16_t{0});
  for (int y = 5; y < 15; ++y) {
    for (int x = 5; x < 35; ++x) {
      t(x, y) = x < 20 ? 1 : 2;
      p(x, y) = 7;
    }
  }
  EXPECT_EQ(match_to_truth(p, t).fusion, 1);
  EXPECT_EQ(match_to_truth(p, t).disintegration, 0);
}

TEST(MatchToTruth, EvenSplitIsDisintegration) {
  LabelMap t(40, 20, std::uint16_t{0}), p(40, 20, std::uint16_t{0});
  for (int y = 5; y < 15; ++y) {
    for (int x = 5; x < 35; ++x) {
      t(x, y) = 1;
      p(x, y) = x < 20 ? 1 : 2;
    }
  }
  const QualityReport q = match_to_truth(p, t);
  EXPECT_EQ(q.disintegration, 1);
  EXPECT_EQ(q.fusion, 0);
}

TEST(MatchToTruth, ShapeMismatchThrows) {
  try {
    match_to_truth(LabelMap(3, 3), LabelMap(4, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(EllipseMoments, HandComputedMask) {
  Raster mask(80, 60, std::uint8_t{0});
  testing::paint_ellipse<std::uint8_t>(mask, 40, 30, 20, 8, 0.3, 1);
  double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int y = 0; y < 60; ++y) {
    for (int x = 0; x < 80; ++x) {
      if (!mask(x, y)) continue;
      n += 1;
      sx += x;
      sy += y;
      sxx += double(x) * x;
      syy += double(y) * y;
      sxy += double(x) * y;
    }
  }
  const EllipseAxes e = ellipse_from_moments(n, sx, sy, sxx, syy, sxy);
  EXPECT_NEAR(e.major, 20.0, 0.5);
  EXPECT_NEAR(e.minor, 8.0, 0.5);
  EXPECT_NEAR(e.orientation, 0.3, 0.05);
}

}  // namespace
}  // namespace granulometer
