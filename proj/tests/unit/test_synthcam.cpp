#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "granulometer/error.hpp"
#include "granulometer/granulometry.hpp"
#include "granulometer/synthcam.hpp"

namespace granulometer::synthcam {
namespace {

SceneSpec small_spec(int count, std::uint64_t seed) {
  SceneSpec spec;
  spec.width_m = 0.25;
  spec.height_m = 0.16;
  spec.particle_count = count;
  spec.packing_seed = seed;
  return spec;
}

LightingCondition lit(double lux, double evenness = 1.0) {
  LightingCondition c;
  c.pile_illuminance_lx = lux;
  c.evenness = evenness;
  return c;
}

double mean_of(const Raster& r) {
  return std::accumulate(r.samples().begin(), r.samples().end(), 0.0) / static_cast<double>(r.size());
}

TEST(GeneratePile, Deterministic) {
  const Scene a = generate_pile(small_spec(150, 4));
  const Scene b = generate_pile(small_spec(150, 4));
  EXPECT_EQ(a.truth_label_map, b.truth_label_map);
  ASSERT_EQ(a.particles.size(), b.particles.size());
  for (std::size_t i = 0; i < a.particles.size(); ++i) EXPECT_EQ(a.particles[i].sieve_mm, b.particles[i].sieve_mm);
  EXPECT_NE(generate_pile(small_spec(150, 5)).truth_label_map, a.truth_label_map);
}

TEST(GeneratePile, SingleParticleIsOneStep) {
  const Scene s = generate_pile(small_spec(1, 9));
  ASSERT_EQ(s.particles.size(), 1u);
  const double d = s.particles[0].sieve_mm;
  for (const auto& p : s.truth_distribution.points) EXPECT_DOUBLE_EQ(p.percent_passing, p.size_mm >= d ? 100.0 : 0.0);
}

TEST(GeneratePile, EmpiricalMedianNearTarget) {
  SceneSpec spec = small_spec(500, 21);
  spec.width_m = 0.4;
  spec.height_m = 0.3;
  const Scene s = generate_pile(spec);
  std::vector<double> sizes;
  for (const auto& p : s.particles) sizes.push_back(p.sieve_mm);
  std::nth_element(sizes.begin(), sizes.begin() + 250, sizes.end());
  EXPECT_NEAR(sizes[250], 6.0, 0.6);
}

TEST(GeneratePile, TruthLabelsReferToParticles) {
  const Scene s = generate_pile(small_spec(200, 2));
  const auto n = static_cast<std::uint16_t>(s.particles.size());
  for (auto v : s.truth_label_map.samples()) ASSERT_LE(v, n);
  EXPECT_EQ(rasterize_truth(s.spec, s.width_px, s.height_px, s.particles), s.truth_label_map);
}

TEST(GeneratePile, ValidationAndPacking) {
  try {
    generate_pile(small_spec(0, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
  SceneSpec crowded = small_spec(5000, 1);
  crowded.width_m = crowded.height_m = 0.03;
  try {
    generate_pile(crowded);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PackingFailure);
  }
}

TEST(Sampler, KolmogorovSmirnovAgainstModel) {
  const SwebrecParams target{19.0, 6.0, 2.0};
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    std::mt19937_64 rng(seed);
    std::vector<double> xs(2000);
    for (auto& x : xs) x = sample_swebrec(target, rng);
    std::sort(xs.begin(), xs.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double f = swebrec_eval(target, xs[i]);
      ks = std::max({ks, std::abs(f - double(i) / xs.size()), std::abs(f - double(i + 1) / xs.size())});
    }
    EXPECT_LT(ks, 0.05) << "seed " << seed;
  }
}

TEST(Sampler, UniformIsOpenInterval) {
  std::mt19937_64 rng(0);
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform_open01(rng);
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Render, ZeroIlluminanceIsNoiseOnly) {
  const Scene s = generate_pile(small_spec(100, 3));
  SensorModel sensor;
  sensor.rng_seed = 17;
  const Raster r = render(s, lit(0.0), sensor);
  const auto hi = *std::max_element(r.samples().begin(), r.samples().end());
  EXPECT_LE(hi, 3.0 * sensor.noise_floor_sigma);
}

TEST(Render, Deterministic) {
  const Scene s = generate_pile(small_spec(100, 3));
  SensorModel sensor;
  sensor.rng_seed = 99;
  EXPECT_EQ(render(s, lit(40.0, 0.3), sensor), render(s, lit(40.0, 0.3), sensor));
}

TEST(Render, BrighterPileRendersBrighter) {
  const Scene s = generate_pile(small_spec(120, 6));
  EXPECT_GT(mean_of(render(s, lit(450.0), {})), mean_of(render(s, lit(11.0), {})));
}

TEST(Render, ExposureMonotoneInIlluminance) {
  const Scene s = generate_pile(small_spec(120, 6));
  for (double evenness : {1.0, 0.3}) {
    double prev = -1.0;
    for (double lux : {0.0, 1.0, 3.0, 11.0, 14.0, 18.0, 40.0, 120.0, 450.0, 9500.0}) {
      const double m = mean_of(render(s, lit(lux, evenness), {}));
      EXPECT_GE(m, prev) << lux;
      prev = m;
    }
  }
}

TEST(Render, UnevenLightDarkensSomeFragments) {
  const Scene s = generate_pile(small_spec(150, 12));
  SensorModel quiet;
  quiet.noise_floor_sigma = 0.0;
  const Raster even = render(s, lit(40.0), quiet);
  const Raster uneven = render(s, lit(40.0, 0.3), quiet);
  EXPECT_NE(even, uneven);
}

TEST(EvennessField, ConstantAtOneAndCvGrowsWithSeverity) {
  const Image<float> flat = evenness_field(64, 40, 1.0, 30.0);
  for (float v : flat.samples()) ASSERT_FLOAT_EQ(v, 1.0f);
  double prev_cv = 0.0;
  for (double e : {0.9, 0.7, 0.5, 0.3, 0.2, 0.0}) {
    const Image<float> f = evenness_field(64, 40, e, 30.0);
    double sum = 0.0, sq = 0.0;
    for (float v : f.samples()) {
      sum += v;
      sq += double(v) * v;
    }
    const double mean = sum / f.size();
    EXPECT_NEAR(mean, 1.0, 1e-5);
    const double cv = std::sqrt(std::max(0.0, sq / f.size() - mean * mean)) / mean;
    EXPECT_GT(cv, prev_cv) << e;
    prev_cv = cv;
  }
}

TEST(GroundTruth, HandCases) {
  Scene one;
  one.particles.push_back({1, 0, 0, 0.005, 0.005, 0, 10.0, 0.6});
  const SizeDistribution d1 = ground_truth_distribution(one, SieveSeries({4.0, 19.0}));
  EXPECT_DOUBLE_EQ(d1.points[0].percent_passing, 0.0);
  EXPECT_DOUBLE_EQ(d1.points[1].percent_passing, 100.0);

  Scene three;
  for (double d : {3.0, 10.0, 15.0}) three.particles.push_back({1, 0, 0, 0, 0, 0, d, 0.6});
  const SizeDistribution d3 = ground_truth_distribution(three, SieveSeries::default_series());
  DelineationNet net;
  for (double d : {3.0, 10.0, 15.0}) {
    Particle p;
    p.ellipse_minor = d;
    net.particles.push_back(p);
  }
  ScaleCalibration cal;
  cal.mm_per_px = 1.0;
  const SizeDistribution ia = build_distribution(net, cal, SieveSeries::default_series());
  for (std::size_t k = 0; k < ia.points.size(); ++k) {
    EXPECT_EQ(d3.points[k].percent_passing, ia.points[k].percent_passing);
  }
  EXPECT_EQ(d3.source, DistributionSource::SieveAnalysis);
}

TEST(GroundTruth, TotalAtMaxSize) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Scene s = generate_pile(small_spec(200, seed));
    EXPECT_DOUBLE_EQ(ground_truth_distribution(s, SieveSeries({2.0, 19.0})).points.back().percent_passing, 100.0);
  }
}

TEST(Illuminance, InverseSquareAndCosine) {
  EXPECT_DOUBLE_EQ(illuminance_at_pile(1000.0, 1.0, 0.0), 1000.0);
  EXPECT_NEAR(illuminance_at_pile(1000.0, 2.0, 0.0), illuminance_at_pile(1000.0, 1.0, 0.0) / 4.0, 1e-12);
  EXPECT_NEAR(illuminance_at_pile(1000.0, 2.0, 60.0), 125.0, 1e-9);
  EXPECT_THROW(illuminance_at_pile(1000.0, 0.0, 0.0), Error);
  EXPECT_THROW(illuminance_at_pile(1000.0, 1.0, 90.0), Error);
}

TEST(LightingTables, IndoorAndOutdoorRows) {
  const auto indoor = indoor_conditions();
  ASSERT_EQ(indoor.size(), 6u);
  const double lux[] = {450, 120, 40, 11, 14, 18};
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(indoor[i].pile_illuminance_lx, lux[i]);
  const auto outdoor = outdoor_conditions();
  ASSERT_EQ(outdoor.size(), 4u);
  EXPECT_EQ(outdoor.back().pile_illuminance_lx, 3.0);
  for (const auto& c : indoor) EXPECT_NO_THROW(c.validate());
}

TEST(Viewpoints, NineFramesInsideScene) {
  const auto [w, h] = scene_pixels_for_frames(856, 480, 3, 3, 8);
  EXPECT_EQ(w, 3 * 856 + 16);
  const auto frames = viewpoint_frames(w, h, 856, 480, 3, 3, 8, 5);
  ASSERT_EQ(frames.size(), 9u);
  for (const auto& f : frames) {
    EXPECT_GE(f.x, 0);
    EXPECT_GE(f.y, 0);
    EXPECT_LE(f.x + f.width, w);
    EXPECT_LE(f.y + f.height, h);
  }
  const auto again = viewpoint_frames(w, h, 856, 480, 3, 3, 8, 5);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(frames[i].x, again[i].x);
  EXPECT_THROW(viewpoint_frames(100, 100, 856, 480, 3, 3, 8, 5), Error);
}

TEST(Sphere, PixelDisc) {
  SceneSpec spec = small_spec(10, 1);
  spec.scale_sphere = ScaleSphere{60.0, 0.08, 0.05};
  const Scene s = generate_pile(spec);
  const auto c = sphere_in_pixels(s);
  ASSERT_TRUE(c.has_value());
  EXPECT_DOUBLE_EQ(c->radius, 120.0);
  EXPECT_DOUBLE_EQ(c->cx, 320.0);
  EXPECT_FALSE(sphere_in_pixels(generate_pile(small_spec(10, 1))).has_value());
}

}  // namespace
}  // namespace granulometer::synthcam
