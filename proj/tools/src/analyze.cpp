#include <algorithm>
#include <future>
#include <numeric>
#include <ostream>

#include "common.hpp"
#include "granulometer/delineation.hpp"
#include "granulometer/error.hpp"
#include "granulometer/granulometry.hpp"
#include "granulometer/io.hpp"
#include "granulometer/serialize.hpp"

namespace granulometer::cli {
namespace {

struct ImageJob {
  fs::path path;
  std::optional<fs::path> annotation;
  std::optional<fs::path> truth_labels;
};

struct ImageResult {
  bool low_contrast = false;
  std::string message;
  DelineationNet net;
  std::optional<ScaleCalibration> calibration;
  std::optional<QualityReport> quality;
};

struct AnalyzeSettings {
  bool annotation = false;
  double sphere_diameter_mm = 60.0;
  ContrastOptions contrast;
  SegmentationParams segmentation;
  SphereDetectOptions sphere;
};

ImageResult analyze_image(const ImageJob& job, const AnalyzeSettings& s) {
  ImageResult r;
  const Raster raw = io::load_raster(job.path);
  std::vector<DetectedCircle> exclusions;
  if (s.annotation) {
    if (job.annotation) {
      const auto traces = io::read_scale_annotation(io::read_text_file(*job.annotation));
      r.calibration = calibration_from_annotation(traces);
    }
  } else {
    // Detection runs on the raw frame: a percentile stretch saturates bright
    // rock tops into sphere look-alikes.
    try {
      r.calibration = detect_scale_spheres(raw, s.sphere_diameter_mm, s.sphere);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoScaleFound) throw;
    }
  }
  if (r.calibration) exclusions = r.calibration->circles;
  try {
    r.net = segment(preprocess(raw, s.contrast), s.segmentation, exclusions);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::LowContrast) throw;
    r.low_contrast = true;
    r.message = e.what();
    return r;
  }
  if (job.truth_labels) {
    const LabelMap truth = io::decode_label_map(io::read_file(*job.truth_labels));
    r.quality = match_to_truth(r.net.label_map, truth);
  }
  return r;
}

std::vector<ImageJob> image_jobs(const json& cfg, const fs::path& base) {
  std::vector<ImageJob> jobs;
  if (cfg.contains("image_dir")) {
    // Every .pgm / .png directly inside, in name order.
    const fs::path dir = resolve(base, cfg.at("image_dir").get<std::string>());
    if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".pgm" || ext == ".png")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (auto& f : files) {
      ImageJob job;
      job.path = f;
      jobs.push_back(job);
    }
    if (jobs.empty()) throw Error(ErrorCode::InvalidArgument, "no images in " + dir.string());
    return jobs;
  }
  if (!cfg.contains("images") || !cfg.at("images").is_array()) {
    throw Error(ErrorCode::InvalidArgument, "config needs an 'images' array or an 'image_dir'");
  }
  for (const auto& item : cfg.at("images")) {
    ImageJob job;
    if (item.is_string()) {
      job.path = resolve(base, item.get<std::string>());
    } else {
      job.path = resolve(base, item.at("path").get<std::string>());
      if (item.contains("annotation")) job.annotation = resolve(base, item.at("annotation").get<std::string>());
      if (item.contains("truth_labels")) job.truth_labels = resolve(base, item.at("truth_labels").get<std::string>());
    }
    jobs.push_back(job);
  }
  if (jobs.empty()) throw Error(ErrorCode::InvalidArgument, "no images to analyze");
  return jobs;
}

json optional_fit(const SizeDistribution& d) {
  try {
    return serialize::to_json(swebrec_fit(fit_points(d), std::nullopt, {.require_convergence = false}));
  } catch (const Error&) {
    return nullptr;
  }
}

}  // namespace

int cmd_analyze(const CommandOptions& options, std::ostream& log) {
  try {
    if (!options.config) throw Error(ErrorCode::InvalidArgument, "analyze needs --config");
    const json cfg = load_json(*options.config);
    const fs::path base = options.config->parent_path();
    const auto jobs = image_jobs(cfg, base);

    AnalyzeSettings s;
    const json scale = cfg.value("scale", json{{"method", "sphere_detect"}});
    const std::string method = scale.value("method", std::string("sphere_detect"));
    if (method == "annotation") {
      s.annotation = true;
    } else if (method != "sphere_detect") {
      throw Error(ErrorCode::InvalidArgument, "scale.method must be 'sphere_detect' or 'annotation'");
    }
    s.sphere_diameter_mm = scale.value("diameter_mm", 60.0);
    if (cfg.contains("contrast")) s.contrast = serialize::contrast_from_json(cfg.at("contrast"));
    if (cfg.contains("segmentation")) s.segmentation = serialize::segmentation_from_json(cfg.at("segmentation"));
    if (cfg.contains("sphere_detect")) s.sphere = serialize::sphere_detect_from_json(cfg.at("sphere_detect"));
    const FinesPolicy fines = cfg.contains("fines") ? serialize::fines_from_json(cfg.at("fines")) : FinesPolicy{};
    const SieveSeries sieves = cfg.contains("sieves") ? SieveSeries(cfg.at("sieves").get<std::vector<double>>())
                                                      : SieveSeries::default_series();
    const double envelope_limit = cfg.value("envelope_limit", 30.0);
    const int threads = std::max(1, cfg.value("threads", 1));
    for (const auto& job : jobs) {
      if (!fs::exists(job.path)) throw Error(ErrorCode::Io, "missing image " + job.path.string());
    }

    // Images are independent; results are collected in input order.
    std::vector<ImageResult> results(jobs.size());
    for (std::size_t first = 0; first < jobs.size(); first += static_cast<std::size_t>(threads)) {
      const std::size_t last = std::min(jobs.size(), first + static_cast<std::size_t>(threads));
      std::vector<std::future<ImageResult>> pending;
      for (std::size_t i = first; i < last; ++i) {
        pending.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred, analyze_image,
                                     std::cref(jobs[i]), std::cref(s)));
      }
      for (std::size_t i = first; i < last; ++i) results[i] = pending[i - first].get();
    }

    json report = {{"label", cfg.value("label", std::string())}};
    report["lighting"] = cfg.contains("lighting") ? cfg.at("lighting") : json(nullptr);
    const bool all_dark =
        std::all_of(results.begin(), results.end(), [](const ImageResult& r) { return r.low_contrast; });

    // Frames without their own scale object share the mean of the others.
    double scale_sum = 0.0;
    int scale_count = 0;
    for (const auto& r : results) {
      if (r.calibration) {
        scale_sum += r.calibration->mm_per_px;
        ++scale_count;
      }
    }
    ScaleCalibration shared;
    shared.method = s.annotation ? ScaleMethod::ManualTrace : ScaleMethod::SphereDetect;
    shared.n_objects = 0;
    for (const auto& r : results) {
      if (r.calibration) shared.n_objects += r.calibration->n_objects;
    }
    if (scale_count > 0) shared.mm_per_px = scale_sum / scale_count;

    json images = json::array();
    std::vector<CalibratedNet> pooled;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const ImageResult& r = results[i];
      json im = {{"path", relative_text(jobs[i].path, base)}};
      if (r.low_contrast) {
        im["status"] = "low_contrast";
        im["message"] = r.message;
        images.push_back(im);
        continue;
      }
      im["status"] = "ok";
      im["particles"] = r.net.particles.size();
      im["unresolved_fraction"] = r.net.unresolved_fraction;
      im["analysis_region_px"] = r.net.analysis_region_px;
      im["calibration"] = r.calibration ? serialize::to_json(*r.calibration) : json(nullptr);
      if (r.quality) im["quality"] = serialize::to_json(*r.quality);
      if (scale_count > 0) {
        const ScaleCalibration& cal = r.calibration ? *r.calibration : shared;
        pooled.push_back({&r.net, cal});
        try {
          im["distribution"] = serialize::to_json(build_distribution(r.net, cal, sieves, fines));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::EmptyNet) throw;
          im["distribution"] = nullptr;
        }
      }
      images.push_back(im);
    }
    report["images"] = images;
    report["sieves"] = std::vector<double>(sieves.sizes().begin(), sieves.sizes().end());
    report["envelope_limit"] = envelope_limit;

    fs::create_directories(options.out);
    if (all_dark) {
      report["status"] = "low_contrast";
      io::write_text_file(options.out / "report.json", serialize::dump(report));
      log << "analyze: every image is below the contrast floor (dark scene)\n";
      return kDark;
    }
    if (scale_count == 0) throw Error(ErrorCode::NoScaleFound, "no image yielded a scale calibration");
    report["status"] = "ok";
    report["calibration"] = serialize::to_json(shared);

    const SizeDistribution combined = combine_distributions(pooled, sieves, fines);
    report["combined"] = serialize::to_json(combined);
    const json fit = optional_fit(combined);
    report["fit"] = fit;
    io::write_text_file(options.out / "distribution.csv", serialize::distribution_csv(combined));
    io::write_text_file(options.out / "fit.json", serialize::dump(fit));

    if (cfg.contains("reference")) {
      const fs::path ref_path = resolve(base, cfg.at("reference").get<std::string>());
      const SizeDistribution reference = serialize::parse_distribution_csv(io::read_text_file(ref_path));
      ResidualReport rr;
      rr.rows = percent_error_residuals(combined, reference, sieves);
      rr.envelope_limit = envelope_limit;
      rr.pass = envelope_check(rr.rows, envelope_limit);
      const json ref_fit = optional_fit(reference);
      json two_norm = nullptr;
      if (!fit.is_null() && !ref_fit.is_null()) {
        const SwebrecParams fitted = serialize::params_from_json(fit);
        const SwebrecParams ref = serialize::params_from_json(ref_fit);
        const auto [lo, hi] = default_two_norm_range(sieves, ref);
        rr.two_norm = two_norm_error(fitted, ref, lo, hi);
        two_norm = rr.two_norm;
      }
      json residuals = serialize::to_json(rr);
      residuals["two_norm"] = two_norm;
      report["reference"] = {{"path", relative_text(ref_path, base)},
                             {"distribution", serialize::to_json(reference)},
                             {"fit", ref_fit}};
      report["residuals"] = residuals;
      io::write_text_file(options.out / "residuals.csv", serialize::residuals_csv(rr.rows));
      log << "analyze: " << pooled.size() << "/" << jobs.size() << " images, envelope "
          << (rr.pass ? "pass" : "fail");
      if (!two_norm.is_null()) log << ", 2-norm " << io::format_number(rr.two_norm, 3);
      log << "\n";
    } else {
      log << "analyze: " << pooled.size() << "/" << jobs.size() << " images, no reference\n";
    }
    io::write_text_file(options.out / "report.json", serialize::dump(report));
    return kOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace granulometer::cli
