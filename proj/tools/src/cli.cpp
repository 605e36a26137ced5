#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "common.hpp"

namespace granulometer::cli {

int run(int argc, const char* const* argv, std::ostream& log) {
  CLI::App app{"Image-based granulometry toolkit", "granulometer"};
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const CommandOptions&, std::ostream&);
    bool needs_config;
  };
  const Entry entries[] = {
      {"synth", "Render a synthetic pile and its lighting conditions", cmd_synth, false},
      {"analyze", "Delineate frames and build a size distribution", cmd_analyze, true},
      {"compare", "Residuals and 2-norm error of reports against a reference", cmd_compare, true},
      {"plan", "Camera waypoints over a pile polygon", cmd_plan, true},
      {"plot", "SVG figures from reports and comparisons", cmd_plot, true},
  };

  std::string config;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::vector<CLI::App*> subs;
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    auto* opt = sub->add_option("--config", config, "JSON configuration file");
    if (e.needs_config) opt->required();
    sub->add_option("--seed", seed, "Seed for every random stream");
    sub->add_option("--out", out, "Output directory")->capture_default_str();
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg, err;
    const int code = app.exit(e, msg, err);
    log << msg.str() << err.str();
    return code == 0 ? kOk : kInputError;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    CommandOptions options;
    if (!config.empty()) options.config = config;
    if (subs[i]->count("--seed") > 0) options.seed = seed;
    options.out = out;
    return entries[i].fn(options, log);
  }
  return kInputError;
}

}  // namespace granulometer::cli
