// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "granulometer/delineation.hpp"
#include "granulometer/granulometry.hpp"
#include "granulometer/io.hpp"
#include "granulometer/missionplan.hpp"
#include "granulometer/swebrec.hpp"
#include "granulometer/synthcam.hpp"
#include "test_support.hpp"

namespace {

using namespace granulometer;
using cli::fs::path;
using nlohmann::json;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "granulometer");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream log;
  return cli::run(static_cast<int>(argv.size()), argv.data(), log);
}

void write(const path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

json read_json(const path& p) { return json::parse(io::read_text_file(p)); }

int synth(const path& out, std::uint64_t seed, const std::string& config_text = "") {
  if (config_text.empty()) return invoke({"synth", "--seed", std::to_string(seed), "--out", out.string()});
  write(out.string() + ".json", config_text);
  return invoke({"synth", "--config", out.string() + ".json", "--seed", std::to_string(seed), "--out", out.string()});
}

int analyze(const path& condition_dir) {
  return invoke({"analyze", "--config", (condition_dir / "analyze.json").string(), "--out",
                 (condition_dir / "out").string()});
}

path condition(const path& synth_out, const std::string& name) {
  for (const auto& e : std::filesystem::directory_iterator(synth_out / "conditions")) {
    const std::string dir = e.path().filename().string();
    if (dir.substr(dir.find('-') + 1) == name) return e.path();
  }
  throw std::runtime_error("no condition " + name);
}

json report_of(const path& condition_dir) { return read_json(condition_dir / "out" / "report.json"); }

double two_norm(const json& report) { return report.at("residuals").at("two_norm").get<double>(); }

bool envelope_pass(const json& report) { return report.at("residuals").at("pass").get<bool>(); }

double worst_residual(const json& report) {
  double worst = 0.0;
  for (const auto& r : report.at("residuals").at("rows")) worst = std::max(worst, std::abs(r.at("residual_pct").get<double>()));
  return worst;
}

Outcome swebrec_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const SwebrecParams truth{19.0, 6.0, 2.0};
  std::vector<SizeFraction> pts;
  for (int i = 0; i < 20; ++i) {
    const double x = 0.5 * std::pow(18.5 / 0.5, i / 19.0);
    pts.push_back({x, swebrec_eval(truth, x)});
  }
  const SwebrecParams fit = swebrec_fit(pts).params;
  const double err = std::max({std::abs(fit.x_max / truth.x_max - 1.0), std::abs(fit.x_50 / truth.x_50 - 1.0),
                               std::abs(fit.b / truth.b - 1.0)});
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.01);
    auto noisy = pts;
    for (auto& p : noisy) p.fraction = std::clamp(p.fraction + noise(rng), 1e-4, 1.0);
    const SwebrecFit f = swebrec_fit(noisy, std::nullopt, {.require_convergence = false});
    good += std::abs(f.params.x_50 / truth.x_50 - 1.0) <= 0.05;
  }
  const double elapsed = seconds_since(t0);
  return {err <= 1e-6 && good >= 9 && elapsed < 5.0,
          "max rel err " + fmt(err) + ", noisy x50 ok " + std::to_string(good) + "/10, " + fmt(elapsed, 3) + " s"};
}

Outcome distribution_correctness() {
  DelineationNet net;
  for (double d : {3.0, 10.0, 15.0}) {
    Particle p;
    p.ellipse_minor = d;
    p.ellipse_major = d;
    p.area = std::numbers::pi * d * d / 4.0;
    net.particles.push_back(p);
  }
  ScaleCalibration cal;
  cal.mm_per_px = 1.0;
  const SizeDistribution d = build_distribution(net, cal, SieveSeries::default_series(), {FinesPolicy::Kind::Ignore});
  const double p4 = d.percent_at(4.0), p125 = d.percent_at(12.5), p19 = d.percent_at(19.0);
  bool hand = std::abs(p4 - 0.61) <= 0.01 && std::abs(p125 - 23.33) <= 0.01 && std::abs(p19 - 100.0) <= 0.01;

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    DelineationNet r;
    const int n = 1 + static_cast<int>(u(rng) * 60);
    for (int i = 0; i < n; ++i) {
      Particle p;
      p.ellipse_major = 1.0 + 120.0 * u(rng);
      p.ellipse_minor = p.ellipse_major * (0.3 + 0.7 * u(rng));
      p.area = std::numbers::pi * p.ellipse_major * p.ellipse_minor / 4.0;
      p.edge_weight = 1.0 + u(rng);
      r.particles.push_back(p);
    }
    r.analysis_region_px = static_cast<std::size_t>(1000 + 200000 * u(rng));
    r.unresolved_px = static_cast<std::size_t>(u(rng) * 0.3 * r.analysis_region_px);
    r.unresolved_fraction = double(r.unresolved_px) / double(r.analysis_region_px);
    ScaleCalibration c;
    c.mm_per_px = 0.05 + 0.5 * u(rng);
    const FinesPolicy policy{u(rng) < 0.5 ? FinesPolicy::Kind::Ignore : FinesPolicy::Kind::BelowSmallestSieve};
    bad += !build_distribution(r, c, SieveSeries::default_series(), policy).is_monotone();
  }
  return {hand && bad == 0, "P(<4)=" + fmt(p4) + " P(<12.5)=" + fmt(p125) + " P(<19)=" + fmt(p19) +
                                ", non-monotone nets " + std::to_string(bad) + "/1000"};
}

Outcome normal_envelope(const path& work) {
  const path out = work / "normal";
  if (synth(out, 42) != 0) return {false, "synth failed"};
  const path dir = condition(out, "normal");
  const auto t0 = std::chrono::steady_clock::now();
  const int rc = analyze(dir);
  const double elapsed = seconds_since(t0);
  if (rc != 0) return {false, "analyze exit " + std::to_string(rc)};
  const json report = report_of(dir);
  std::size_t particles = 0, frames = 0;
  for (const auto& im : report.at("images")) {
    particles += im.value("particles", std::size_t{0});
    ++frames;
  }
  const double lux = report.at("lighting").at("pile_illuminance_lx").get<double>();
  const double evenness = report.at("lighting").at("evenness").get<double>();
  const bool ok = envelope_pass(report) && particles >= 300 && frames == 9 && lux == 450.0 && evenness == 1.0 &&
                  elapsed < 60.0;
  return {ok, std::to_string(particles) + " particles, max |residual| " + fmt(worst_residual(report), 3) + "%, " +
                  fmt(elapsed, 3) + " s for " + std::to_string(frames) + " frames"};
}

Outcome dark_failure(const path& work) {
  const path outdoor = work / "outdoor";
  if (synth(outdoor, 42, R"({"lighting": "outdoor"})") != 0) return {false, "synth failed"};
  const int rc3 = analyze(condition(outdoor, "dark"));
  const double lux3 = report_of(condition(outdoor, "dark")).at("lighting").at("pile_illuminance_lx").get<double>();

  const path dir11 = condition(work / "normal", "dark");
  const int rc11 = analyze(dir11);
  std::string detail = "3 lx exit " + std::to_string(rc3) + "; 11 lx exit " + std::to_string(rc11);
  bool fails11 = rc11 != 0;
  if (rc11 == 0) {
    const json r = report_of(dir11);
    fails11 = !envelope_pass(r);
    detail += ", max |residual| " + fmt(worst_residual(r), 3) + "%";
  }
  return {rc3 == 2 && lux3 == 3.0 && fails11, detail};
}

Outcome uneven_vs_even(const path& work) {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const path out = work / ("uneven_" + std::to_string(seed));
    if (synth(out, seed, R"({"lighting": [{"label": "even", "pile_illuminance_lx": 40, "evenness": 1.0},
                                          {"label": "uneven", "pile_illuminance_lx": 40, "evenness": 0.3}]})") != 0) {
      return {false, "synth failed"};
    }
    const path even = condition(out, "even"), uneven = condition(out, "uneven");
    if (analyze(even) != 0 || analyze(uneven) != 0) return {false, "analyze failed for seed " + std::to_string(seed)};
    const double e = two_norm(report_of(even)), u = two_norm(report_of(uneven));
    wins += u > e;
    detail += (seed > 1 ? ", " : "") + fmt(u, 3) + ">" + fmt(e, 3);
  }
  return {wins == 5, std::to_string(wins) + "/5 (" + detail + ")"};
}

Outcome artificial_recovery(const path& work) {
  const path out = work / "normal";
  double ref = 0.0;
  std::string detail;
  bool ok = true;
  for (const char* name : {"normal", "artificial-1", "artificial-2"}) {
    const path dir = condition(out, name);
    if (!std::filesystem::exists(dir / "out" / "report.json") && analyze(dir) != 0) return {false, "analyze failed"};
    const json r = report_of(dir);
    const double n = two_norm(r);
    const double lux = r.at("lighting").at("pile_illuminance_lx").get<double>();
    if (std::string(name) == "normal") {
      ref = n;
    } else {
      ok = ok && envelope_pass(r) && n <= 2.0 * ref;
    }
    detail += fmt(lux) + " lx: 2-norm " + fmt(n, 3) + (envelope_pass(r) ? " pass" : " fail") + "; ";
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

Outcome sphere_scale() {
  synthcam::SceneSpec spec;
  spec.width_m = 856 * 0.25 / 1000.0;
  spec.height_m = 480 * 0.25 / 1000.0;
  spec.particle_count = 150;
  spec.packing_seed = 42;
  spec.scale_sphere = synthcam::ScaleSphere{60.0, 0.107, 0.06};
  const synthcam::Scene scene = synthcam::generate_pile(spec);
  synthcam::LightingCondition light;
  light.pile_illuminance_lx = 450.0;
  synthcam::SensorModel sensor;
  sensor.rng_seed = 7;
  const ScaleCalibration cal = detect_scale_spheres(synthcam::render(scene, light, sensor), 60.0);
  const double rel = std::abs(cal.mm_per_px / spec.mm_per_px - 1.0);
  return {rel <= 0.01, "mm_per_px " + fmt(cal.mm_per_px, 6) + " (rel err " + fmt(rel, 3) + ")"};
}

missionplan::Quad ray_cast(const missionplan::CameraModel& cam, const missionplan::Waypoint& wp) {
  // Level camera basis rotated about x by the depression angle.
  const double t = wp.tilt_deg * std::numbers::pi / 180.0;
  const std::array<double, 3> right{1, 0, 0}, forward{0, std::cos(t), -std::sin(t)}, up{0, std::sin(t), std::cos(t)};
  const double th = std::tan(cam.h_fov_deg * std::numbers::pi / 360.0);
  const double tv = std::tan(cam.v_fov_deg * std::numbers::pi / 360.0);
  const int sx[4] = {-1, 1, 1, -1}, sy[4] = {-1, -1, 1, 1};
  missionplan::Quad q;
  for (int i = 0; i < 4; ++i) {
    double d[3];
    for (int k = 0; k < 3; ++k) d[k] = forward[k] + sx[i] * th * right[k] + sy[i] * tv * up[k];
    const double s = wp.z_m / -d[2];
    q[i] = {wp.x_m + s * d[0], wp.y_m + s * d[1]};
  }
  return q;
}

Outcome flight_plan() {
  const missionplan::FlightPlan plan = missionplan::plan_flight({{0, 0}, {2, 0}, {2, 2}, {0, 2}}, {});
  bool ok = plan.waypoints.size() == 9 && plan.max_overlap <= 0.10;
  for (const auto& wp : plan.waypoints) ok = ok && wp.tilt_deg == 83.0 && wp.z_m == 0.5;
  for (std::size_t i = 0; i < plan.footprints.size(); ++i) {
    for (std::size_t j = i + 1; j < plan.footprints.size(); ++j) {
      ok = ok && missionplan::overlap_fraction(plan.footprints[i], plan.footprints[j]) <= 0.10;
    }
  }
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    missionplan::CameraModel cam;
    cam.h_fov_deg = 30.0 + 60.0 * u(rng);
    cam.v_fov_deg = 20.0 + 40.0 * u(rng);
    cam.max_tilt_deg = 90.0;
    const missionplan::Waypoint wp{-3 + 6 * u(rng), -3 + 6 * u(rng), 0.1 + 4 * u(rng),
                                   cam.v_fov_deg / 2 + 1 + (89 - cam.v_fov_deg / 2) * u(rng)};
    const auto a = missionplan::footprint(cam, wp), b = ray_cast(cam, wp);
    for (int i = 0; i < 4; ++i) worst = std::max({worst, std::abs(a[i].x - b[i].x), std::abs(a[i].y - b[i].y)});
  }
  ok = ok && worst <= 1e-9;
  return {ok, std::to_string(plan.waypoints.size()) + " waypoints, max overlap " + fmt(plan.max_overlap) +
                  ", footprint max dev " + fmt(worst, 3) + " m"};
}

Outcome determinism(const path& work) {
  const path root = work / "determinism";
  std::vector<std::string> differing;
  auto twice = [&](const std::string& name, const std::function<int(const path&)>& cmd) {
    const int a = cmd(root / (name + "_a")), b = cmd(root / (name + "_b"));
    if (a != b || testing::snapshot_tree(root / (name + "_a")) != testing::snapshot_tree(root / (name + "_b"))) {
      differing.push_back(name);
    }
  };
  const path s = root / "synth_a";
  twice("synth", [](const path& out) { return synth(out, 99); });
  const path cond = condition(s, "uneven");
  twice("analyze", [&](const path& out) {
    return invoke({"analyze", "--config", (cond / "analyze.json").string(), "--out", out.string()});
  });
  write(root / "compare.json", json{{"reports", {(root / "analyze_a" / "report.json").string()}},
                                    {"reference", (s / "truth_distribution.csv").string()}}
                                   .dump());
  twice("compare", [&](const path& out) {
    return invoke({"compare", "--config", (root / "compare.json").string(), "--out", out.string()});
  });
  write(root / "plan.json", R"({"polygon": [[0, 0], [2, 0], [2, 2], [0, 2]]})");
  twice("plan", [&](const path& out) {
    return invoke({"plan", "--config", (root / "plan.json").string(), "--out", out.string()});
  });
  write(root / "plot.json", json{{"reports", {(root / "analyze_a" / "report.json").string()}},
                                 {"reference", (s / "truth_distribution.csv").string()},
                                 {"comparison", (root / "compare_a" / "comparison.json").string()}}
                                .dump());
  twice("plot", [&](const path& out) {
    return invoke({"plot", "--config", (root / "plot.json").string(), "--out", out.string()});
  });
  std::string detail = differing.empty() ? "synth, analyze, compare, plan, plot identical" : "differs:";
  for (const auto& d : differing) detail += " " + d;
  return {differing.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const path work = argc > 1 ? path(argv[1]) : std::filesystem::temp_directory_path() / "granulometer_acceptance";
  std::filesystem::remove_all(work);
  std::filesystem::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"swebrec oracle recovery", swebrec_recovery},
      {"distribution correctness", distribution_correctness},
      {"normal-lighting envelope", [&] { return normal_envelope(work); }},
      {"dark failure", [&] { return dark_failure(work); }},
      {"uneven vs even lighting", [&] { return uneven_vs_even(work); }},
      {"artificial-light recovery", [&] { return artificial_recovery(work); }},
      {"scale calibration", sphere_scale},
      {"flight plan", flight_plan},
      {"determinism", [&] { return determinism(work); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
