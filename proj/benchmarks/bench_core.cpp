#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "granulometer/delineation.hpp"
#include "granulometer/granulometry.hpp"
#include "granulometer/missionplan.hpp"
#include "granulometer/swebrec.hpp"
#include "granulometer/synthcam.hpp"

namespace {

using namespace granulometer;

// One 856x480 frame worth of pile at the default scale.
synthcam::Scene frame_scene() {
  synthcam::SceneSpec spec;
  spec.width_m = 856 * spec.mm_per_px / 1000.0;
  spec.height_m = 480 * spec.mm_per_px / 1000.0;
  spec.particle_count = 180;
  spec.packing_seed = 42;
  return synthcam::generate_pile(spec);
}

synthcam::LightingCondition lux(double v, double evenness = 1.0) {
  synthcam::LightingCondition c;
  c.pile_illuminance_lx = v;
  c.evenness = evenness;
  return c;
}

void BM_GeneratePile(benchmark::State& state) {
  synthcam::SceneSpec spec;
  spec.width_m = 856 * spec.mm_per_px / 1000.0;
  spec.height_m = 480 * spec.mm_per_px / 1000.0;
  spec.particle_count = static_cast<int>(state.range(0));
  for (auto _ : state) {
    spec.packing_seed = static_cast<std::uint64_t>(state.iterations());
    benchmark::DoNotOptimize(synthcam::generate_pile(spec));
  }
}
BENCHMARK(BM_GeneratePile)->Arg(60)->Arg(180)->Unit(benchmark::kMillisecond);

void BM_Render(benchmark::State& state) {
  const synthcam::Scene scene = frame_scene();
  const auto light = lux(40.0, state.range(0) / 10.0);
  for (auto _ : state) benchmark::DoNotOptimize(synthcam::render(scene, light, {}));
}
BENCHMARK(BM_Render)->Arg(10)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_Segment(benchmark::State& state) {
  const Raster frame = preprocess(synthcam::render(frame_scene(), lux(static_cast<double>(state.range(0))), {}));
  for (auto _ : state) benchmark::DoNotOptimize(segment(frame));
}
BENCHMARK(BM_Segment)->Arg(450)->Arg(14)->Unit(benchmark::kMillisecond);

void BM_Preprocess(benchmark::State& state) {
  const Raster frame = synthcam::render(frame_scene(), lux(450.0), {});
  for (auto _ : state) benchmark::DoNotOptimize(preprocess(frame));
}
BENCHMARK(BM_Preprocess)->Unit(benchmark::kMillisecond);

void BM_SwebrecFit(benchmark::State& state) {
  const SwebrecParams truth{19.0, 6.0, 2.0};
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<SizeFraction> pts;
  const int n = static_cast<int>(state.range(0));
  for (int i = 0; i < n; ++i) {
    const double x = 0.5 * std::pow(18.5 / 0.5, i / double(n - 1));
    pts.push_back({x, std::clamp(swebrec_eval(truth, x) + noise(rng), 1e-4, 1.0)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(swebrec_fit(pts, std::nullopt, {.require_convergence = false}));
}
BENCHMARK(BM_SwebrecFit)->Arg(4)->Arg(20)->Arg(200);

void BM_BuildDistribution(benchmark::State& state) {
  const Raster frame = preprocess(synthcam::render(frame_scene(), lux(450.0), {}));
  const DelineationNet net = segment(frame);
  ScaleCalibration cal;
  cal.mm_per_px = 0.25;
  for (auto _ : state) benchmark::DoNotOptimize(build_distribution(net, cal, SieveSeries::default_series()));
}
BENCHMARK(BM_BuildDistribution);

void BM_Footprint(benchmark::State& state) {
  const missionplan::CameraModel cam;
  missionplan::Waypoint wp{0.0, 0.0, 0.5, 83.0};
  for (auto _ : state) {
    wp.x_m += 1e-6;
    benchmark::DoNotOptimize(missionplan::footprint(cam, wp));
  }
}
BENCHMARK(BM_Footprint);

void BM_PlanFlight(benchmark::State& state) {
  const missionplan::Polygon pile{{0, 0}, {2, 0}, {2, 2}, {0, 2}};
  for (auto _ : state) benchmark::DoNotOptimize(missionplan::plan_flight(pile, {}));
}
BENCHMARK(BM_PlanFlight);

}  // namespace

BENCHMARK_MAIN();
