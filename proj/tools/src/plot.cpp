#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "common.hpp"
#include "granulometer/error.hpp"
#include "granulometer/granulometry.hpp"
#include "granulometer/io.hpp"
#include "granulometer/serialize.hpp"

namespace granulometer::cli {
namespace {

constexpr double kWidth = 640.0, kHeight = 420.0;
constexpr double kLeft = 60.0, kRight = 20.0, kTop = 30.0, kBottom = 50.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double v) { return io::format_number(v, 2); }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

// Log-x, linear-y plot area.
struct Axes {
  double x_lo, x_hi, y_lo, y_hi;
  double px(double x) const {
    return kLeft + (std::log(x) - std::log(x_lo)) / (std::log(x_hi) - std::log(x_lo)) * (kWidth - kLeft - kRight);
  }
  double py(double y) const { return kHeight - kBottom - (y - y_lo) / (y_hi - y_lo) * (kHeight - kTop - kBottom); }
};

void frame(std::ostringstream& svg, const Axes& ax, const std::string& title, const std::string& xlabel,
           const std::string& ylabel, const std::vector<double>& xticks, const std::vector<double>& yticks) {
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\"" << fmt(kHeight)
      << "\" viewBox=\"0 0 " << fmt(kWidth) << ' ' << fmt(kHeight) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
      << "</text>\n";
  const double x0 = ax.px(ax.x_lo), x1 = ax.px(ax.x_hi), y0 = ax.py(ax.y_lo), y1 = ax.py(ax.y_hi);
  svg << "<rect class=\"axes\" x=\"" << fmt(x0) << "\" y=\"" << fmt(y1) << "\" width=\"" << fmt(x1 - x0)
      << "\" height=\"" << fmt(y0 - y1) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : xticks) {
    svg << "<line x1=\"" << fmt(ax.px(t)) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(ax.px(t)) << "\" y2=\""
        << fmt(y0 + 4) << "\" stroke=\"black\"/><text x=\"" << fmt(ax.px(t)) << "\" y=\"" << fmt(y0 + 16)
        << "\" text-anchor=\"middle\">" << io::format_number(t, t < 10 ? 1 : 0) << "</text>\n";
  }
  for (double t : yticks) {
    svg << "<line x1=\"" << fmt(x0 - 4) << "\" y1=\"" << fmt(ax.py(t)) << "\" x2=\"" << fmt(x0) << "\" y2=\""
        << fmt(ax.py(t)) << "\" stroke=\"black\"/><text x=\"" << fmt(x0 - 7) << "\" y=\"" << fmt(ax.py(t) + 4)
        << "\" text-anchor=\"end\">" << io::format_number(t, 1) << "</text>\n";
  }
  svg << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"" << fmt(kHeight - 12) << "\" text-anchor=\"middle\">"
      << escape(xlabel) << "</text>\n";
  svg << "<text transform=\"translate(16 " << fmt((y0 + y1) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(ylabel) << "</text>\n";
}

struct Curve {
  std::string label;
  SizeDistribution distribution;
};

std::string distribution_svg(const std::vector<Curve>& curves, const std::optional<SizeDistribution>& reference,
                             const std::optional<SwebrecParams>& reference_fit, double limit,
                             const std::vector<double>& sieves) {
  const double x_lo = sieves.front() / 2.0;
  const double x_hi = sieves.back() * 1.5;
  const Axes ax{x_lo, x_hi, 0.0, 100.0};
  std::ostringstream svg;
  std::vector<double> xticks;
  for (double s : sieves) xticks.push_back(s);
  frame(svg, ax, "Percent passing", "size (mm, log scale)", "percent passing (%)", xticks, {0, 20, 40, 60, 80, 100});

  if (reference) {
    constexpr int kSamples = 80;
    std::vector<std::pair<double, double>> ref;
    for (int i = 0; i < kSamples; ++i) {
      const double x = std::exp(std::log(x_lo) + (std::log(x_hi) - std::log(x_lo)) * i / (kSamples - 1));
      const double y = reference_fit ? 100.0 * swebrec_eval(*reference_fit, x) : reference->percent_at(x);
      ref.emplace_back(x, y);
    }
    svg << "<polygon class=\"envelope\" fill=\"#bbbbbb\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
    for (const auto& [x, y] : ref) svg << fmt(ax.px(x)) << ',' << fmt(ax.py(std::min(100.0, y * (1 + limit / 100)))) << ' ';
    for (auto it = ref.rbegin(); it != ref.rend(); ++it) {
      svg << fmt(ax.px(it->first)) << ',' << fmt(ax.py(std::max(0.0, it->second * (1 - limit / 100)))) << ' ';
    }
    svg << "\"/>\n";
    svg << "<polyline class=\"reference\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : ref) svg << fmt(ax.px(x)) << ',' << fmt(ax.py(y)) << ' ';
    svg << "\"/>\n";
  }
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    svg << "<g class=\"condition\" data-label=\"" << escape(curves[k].label) << "\" fill=\"" << color << "\">\n";
    for (const auto& p : curves[k].distribution.points) {
      if (p.size_mm < x_lo || p.size_mm > x_hi) continue;
      svg << "<circle cx=\"" << fmt(ax.px(p.size_mm)) << "\" cy=\"" << fmt(ax.py(p.percent_passing))
          << "\" r=\"4\"/>\n";
    }
    svg << "<text x=\"" << fmt(kLeft + 10) << "\" y=\"" << fmt(kTop + 16 + 14.0 * k) << "\">"
        << escape(curves[k].label.empty() ? "report " + std::to_string(k + 1) : curves[k].label) << "</text>\n";
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string scatter_svg(const json& comparison) {
  struct Point {
    std::string label;
    double lux;
    double norm;
  };
  std::vector<Point> pts;
  for (const auto& c : comparison.at("conditions")) {
    if (c.at("two_norm").is_null() || c.at("pile_illuminance_lx").is_null()) continue;
    const double lux = c.at("pile_illuminance_lx").get<double>();
    if (!(lux > 0.0)) continue;
    pts.push_back({c.value("label", std::string()), lux, c.at("two_norm").get<double>()});
  }
  double lux_lo = 1.0, lux_hi = 1000.0, norm_hi = 1.0;
  for (const auto& p : pts) {
    lux_lo = std::min(lux_lo, p.lux);
    lux_hi = std::max(lux_hi, p.lux);
    norm_hi = std::max(norm_hi, p.norm);
  }
  const Axes ax{std::pow(10.0, std::floor(std::log10(lux_lo))), std::pow(10.0, std::ceil(std::log10(lux_hi))), 0.0,
                std::ceil(norm_hi * 1.1)};
  std::vector<double> xticks;
  for (double t = ax.x_lo; t <= ax.x_hi * 1.0001; t *= 10.0) xticks.push_back(t);
  std::vector<double> yticks;
  for (int i = 0; i <= 4; ++i) yticks.push_back(ax.y_hi * i / 4.0);
  std::ostringstream svg;
  frame(svg, ax, "2-norm error vs illuminance", "illuminance (lx, log scale)", "2-norm error (%)", xticks, yticks);
  for (const auto& p : pts) {
    svg << "<circle class=\"condition\" data-label=\"" << escape(p.label) << "\" data-lux=\""
        << io::format_number(p.lux) << "\" data-two-norm=\"" << io::format_number(p.norm) << "\" cx=\""
        << fmt(ax.px(p.lux)) << "\" cy=\"" << fmt(ax.py(p.norm)) << "\" r=\"5\" fill=\"#1f77b4\"/>\n";
    svg << "<text x=\"" << fmt(ax.px(p.lux) + 7) << "\" y=\"" << fmt(ax.py(p.norm) - 5) << "\">" << escape(p.label)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

int cmd_plot(const CommandOptions& options, std::ostream& log) {
  try {
    if (!options.config) throw Error(ErrorCode::InvalidArgument, "plot needs --config");
    const json cfg = load_json(*options.config);
    const fs::path base = options.config->parent_path();
    if (!cfg.contains("reports") && !cfg.contains("comparison")) {
      throw Error(ErrorCode::InvalidArgument, "config needs 'reports' and/or 'comparison'");
    }
    fs::create_directories(options.out);
    int written = 0;

    if (cfg.contains("reports")) {
      std::vector<Curve> curves;
      std::optional<SizeDistribution> reference;
      std::optional<SwebrecParams> reference_fit;
      double limit = cfg.value("envelope_limit", 30.0);
      std::vector<double> sieves;
      for (const auto& item : cfg.at("reports")) {
        const json report = load_json(resolve(base, item.get<std::string>()));
        if (!report.contains("status")) throw Error(ErrorCode::ParseError, "not an analysis report: " + item.get<std::string>());
        if (sieves.empty() && report.contains("sieves")) sieves = report.at("sieves").get<std::vector<double>>();
        if (report.at("status") != "ok") continue;
        curves.push_back({report.value("label", std::string()), serialize::distribution_from_json(report.at("combined"))});
        if (!reference && report.contains("reference")) {
          const json& ref = report.at("reference");
          reference = serialize::distribution_from_json(ref.at("distribution"));
          if (!ref.at("fit").is_null()) reference_fit = serialize::params_from_json(ref.at("fit"));
          limit = report.value("envelope_limit", limit);
        }
      }
      if (cfg.contains("reference")) {
        reference = serialize::parse_distribution_csv(
            io::read_text_file(resolve(base, cfg.at("reference").get<std::string>())));
        reference_fit.reset();
        try {
          reference_fit = swebrec_fit(fit_points(*reference), std::nullopt, {.require_convergence = false}).params;
        } catch (const Error&) {
        }
      }
      if (sieves.empty()) {
        const auto d = SieveSeries::default_series().sizes();
        sieves.assign(d.begin(), d.end());
      }
      io::write_text_file(options.out / "distribution.svg", distribution_svg(curves, reference, reference_fit, limit, sieves));
      ++written;
    }
    if (cfg.contains("comparison")) {
      const json comparison = load_json(resolve(base, cfg.at("comparison").get<std::string>()));
      if (!comparison.contains("conditions")) throw Error(ErrorCode::ParseError, "not a comparison file");
      io::write_text_file(options.out / "illuminance_vs_error.svg", scatter_svg(comparison));
      ++written;
    }
    log << "plot: " << written << " figure(s)\n";
    return kOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace granulometer::cli
