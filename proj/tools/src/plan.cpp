#include <ostream>

#include "common.hpp"
#include "granulometer/error.hpp"
#include "granulometer/io.hpp"
#include "granulometer/missionplan.hpp"
#include "granulometer/serialize.hpp"

namespace granulometer::cli {

int cmd_plan(const CommandOptions& options, std::ostream& log) {
  try {
    if (!options.config) throw Error(ErrorCode::InvalidArgument, "plan needs --config");
    const json cfg = load_json(*options.config);
    const fs::path base = options.config->parent_path();
    if (!cfg.contains("polygon")) throw Error(ErrorCode::InvalidArgument, "config needs 'polygon'");

    missionplan::Polygon pile;
    const json& poly = cfg.at("polygon");
    if (poly.is_string()) {
      pile = serialize::parse_polygon_csv(io::read_text_file(resolve(base, poly.get<std::string>())));
    } else {
      for (const auto& p : poly) pile.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    const missionplan::CameraModel cam =
        cfg.contains("camera") ? serialize::camera_from_json(cfg.at("camera")) : missionplan::CameraModel{};
    missionplan::PlanOptions opt;
    opt.altitude_m = cfg.value("altitude_m", opt.altitude_m);
    opt.tilt_deg = cfg.value("tilt_deg", opt.tilt_deg);
    opt.overlap_budget = cfg.value("overlap_budget", opt.overlap_budget);
    opt.min_coverage = cfg.value("min_coverage", opt.min_coverage);
    opt.rows = cfg.value("rows", opt.rows);
    opt.cols = cfg.value("cols", opt.cols);

    const missionplan::FlightPlan plan = missionplan::plan_flight(pile, cam, opt);
    json doc = serialize::to_json(plan);
    doc["camera"] = serialize::to_json(cam);
    doc["ground_sample_distance_mm_per_px"] = missionplan::ground_sample_distance(cam, opt.altitude_m);
    fs::create_directories(options.out);
    io::write_text_file(options.out / "plan.csv", serialize::plan_csv(plan));
    io::write_text_file(options.out / "plan.json", serialize::dump(doc));
    log << "max overlap: " << io::format_number(plan.max_overlap) << "\n";
    return kOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace granulometer::cli
