#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "common.hpp"
#include "granulometer/error.hpp"
#include "granulometer/granulometry.hpp"
#include "granulometer/io.hpp"
#include "granulometer/serialize.hpp"

namespace granulometer::cli {
namespace {

struct Entry {
  std::size_t order = 0;
  std::string path;
  std::string label;
  double lux = std::numeric_limits<double>::quiet_NaN();
  double evenness = std::numeric_limits<double>::quiet_NaN();
  bool dark = false;
  std::vector<ResidualRow> rows;
  std::optional<double> two_norm;
  bool pass = false;
};

std::string number_or_empty(double v) { return std::isnan(v) ? std::string() : io::format_number(v); }

}  // namespace

int cmd_compare(const CommandOptions& options, std::ostream& log) {
  try {
    if (!options.config) throw Error(ErrorCode::InvalidArgument, "compare needs --config");
    const json cfg = load_json(*options.config);
    const fs::path base = options.config->parent_path();
    if (!cfg.contains("reports") || !cfg.at("reports").is_array() || cfg.at("reports").empty()) {
      throw Error(ErrorCode::InvalidArgument, "config needs a non-empty 'reports' array");
    }
    const fs::path ref_path = resolve(base, cfg.at("reference").get<std::string>());
    const SizeDistribution reference = serialize::parse_distribution_csv(io::read_text_file(ref_path));
    if (reference.points.size() < 3) {
      throw Error(ErrorCode::TooFewPoints, "reference needs at least 3 points, got " +
                                               std::to_string(reference.points.size()));
    }
    const SwebrecFit ref_fit = swebrec_fit(fit_points(reference), std::nullopt, {.require_convergence = false});
    const SieveSeries sieves = cfg.contains("sieves") ? SieveSeries(cfg.at("sieves").get<std::vector<double>>())
                                                      : SieveSeries::default_series();
    const double limit = cfg.value("envelope_limit", 30.0);

    std::vector<Entry> entries;
    for (const auto& item : cfg.at("reports")) {
      const fs::path path = resolve(base, item.get<std::string>());
      const json report = load_json(path);
      Entry e;
      e.order = entries.size();
      e.path = relative_text(path, base);
      e.label = report.value("label", std::string());
      const json& light = report.contains("lighting") ? report.at("lighting") : json(nullptr);
      if (light.is_object()) {
        e.lux = light.value("pile_illuminance_lx", e.lux);
        e.evenness = light.value("evenness", e.evenness);
      }
      e.dark = report.value("status", std::string("ok")) != "ok";
      if (!e.dark) {
        const SizeDistribution ia = serialize::distribution_from_json(report.at("combined"));
        e.rows = percent_error_residuals(ia, reference, sieves);
        e.pass = envelope_check(e.rows, limit);
        if (report.contains("fit") && !report.at("fit").is_null()) {
          const SwebrecParams fitted = serialize::params_from_json(report.at("fit"));
          const auto [lo, hi] = default_two_norm_range(sieves, ref_fit.params);
          e.two_norm = two_norm_error(fitted, ref_fit.params, lo, hi);
        }
      }
      entries.push_back(std::move(e));
    }
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      const bool an = std::isnan(a.lux), bn = std::isnan(b.lux);
      if (an != bn) return bn;
      if (!an && a.lux != b.lux) return a.lux < b.lux;
      return a.label < b.label;
    });

    std::ostringstream rows_csv, summary_csv;
    rows_csv << "label,illuminance_lx,size_mm,p_ia,p_sa,residual_pct\n";
    summary_csv << "label,illuminance_lx,evenness,two_norm,max_abs_residual_pct,pass,status\n";
    json out = json::array();
    for (const auto& e : entries) {
      double worst = 0.0;
      json rows = json::array();
      for (const auto& r : e.rows) {
        worst = std::max(worst, std::abs(r.residual_pct));
        rows_csv << e.label << ',' << number_or_empty(e.lux) << ',' << io::format_number(r.size_mm) << ','
                 << io::format_number(r.p_ia) << ',' << io::format_number(r.p_sa) << ','
                 << io::format_number(r.residual_pct) << '\n';
        rows.push_back({{"size_mm", r.size_mm}, {"p_ia", r.p_ia}, {"p_sa", r.p_sa}, {"residual_pct", r.residual_pct}});
      }
      const char* status = e.dark ? "low_contrast" : "ok";
      summary_csv << e.label << ',' << number_or_empty(e.lux) << ',' << number_or_empty(e.evenness) << ','
                  << (e.two_norm ? io::format_number(*e.two_norm) : std::string()) << ','
                  << (e.dark ? std::string() : io::format_number(worst)) << ',' << (e.pass ? "true" : "false") << ','
                  << status << '\n';
      out.push_back({{"label", e.label},
                     {"report", e.path},
                     {"pile_illuminance_lx", std::isnan(e.lux) ? json(nullptr) : json(e.lux)},
                     {"evenness", std::isnan(e.evenness) ? json(nullptr) : json(e.evenness)},
                     {"status", status},
                     {"rows", rows},
                     {"two_norm", e.two_norm ? json(*e.two_norm) : json(nullptr)},
                     {"max_abs_residual_pct", e.dark ? json(nullptr) : json(worst)},
                     {"pass", e.pass}});
    }
    json doc = {{"reference", {{"path", relative_text(ref_path, base)},
                               {"distribution", serialize::to_json(reference)},
                               {"fit", serialize::to_json(ref_fit)}}},
                {"envelope_limit", limit},
                {"sieves", std::vector<double>(sieves.sizes().begin(), sieves.sizes().end())},
                {"conditions", out}};
    fs::create_directories(options.out);
    io::write_text_file(options.out / "comparison.csv", rows_csv.str());
    io::write_text_file(options.out / "summary.csv", summary_csv.str());
    io::write_text_file(options.out / "comparison.json", serialize::dump(doc));
    log << "compare: " << entries.size() << " reports\n";
    return kOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace granulometer::cli
