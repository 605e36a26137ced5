#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>

#include "common.hpp"
#include "granulometer/error.hpp"
#include "granulometer/io.hpp"
#include "granulometer/serialize.hpp"
#include "granulometer/synthcam.hpp"

namespace granulometer::cli {
namespace {

using namespace synthcam;

struct FrameLayout {
  int width = 856;
  int height = 480;
  int rows = 3;
  int cols = 3;
  int jitter_px = 8;
};

std::vector<LightingCondition> lighting_table(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "indoor") return indoor_conditions();
    if (name == "outdoor") return outdoor_conditions();
    if (name == "all") {
      auto rows = indoor_conditions();
      for (auto& r : outdoor_conditions()) {
        r.label = "outdoor-" + r.label;
        rows.push_back(r);
      }
      return rows;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown lighting table '" + name + "'");
  }
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::InvalidArgument, "lighting must be a table name or a non-empty array");
  std::vector<LightingCondition> rows;
  for (const auto& row : j) rows.push_back(serialize::lighting_from_json(row));
  return rows;
}

// Pending output tree, written only after every step has succeeded.
using Tree = std::map<fs::path, io::Bytes>;

void put_text(Tree& tree, const fs::path& p, const std::string& text) { tree[p] = io::Bytes(text.begin(), text.end()); }

}  // namespace

int cmd_synth(const CommandOptions& options, std::ostream& log) {
  try {
    json cfg = options.config ? load_json(*options.config) : json::object();
    const std::uint64_t seed = options.seed.value_or(cfg.value("seed", std::uint64_t{42}));

    FrameLayout layout;
    if (cfg.contains("frames")) {
      const json& f = cfg.at("frames");
      layout.width = f.value("width", layout.width);
      layout.height = f.value("height", layout.height);
      layout.rows = f.value("rows", layout.rows);
      layout.cols = f.value("cols", layout.cols);
      layout.jitter_px = f.value("jitter_px", layout.jitter_px);
    }

    SceneSpec spec;
    spec.particle_count = 1800;
    spec.scale_sphere = ScaleSphere{};
    if (cfg.contains("scene")) {
      const SceneSpec given = serialize::scene_spec_from_json(cfg.at("scene"));
      const json& s = cfg.at("scene");
      spec = given;
      if (!s.contains("particle_count")) spec.particle_count = 1800;
      if (!s.contains("scale_sphere")) spec.scale_sphere = ScaleSphere{};
    }
    const auto [scene_w, scene_h] =
        scene_pixels_for_frames(layout.width, layout.height, layout.rows, layout.cols, layout.jitter_px);
    if (!(spec.width_m > 0.0)) spec.width_m = scene_w * spec.mm_per_px / 1000.0;
    if (!(spec.height_m > 0.0)) spec.height_m = scene_h * spec.mm_per_px / 1000.0;
    if (spec.scale_sphere && !(cfg.contains("scene") && cfg.at("scene").contains("scale_sphere"))) {
      spec.scale_sphere->x_m = spec.width_m / 2.0;
      spec.scale_sphere->y_m = spec.height_m / 2.0;
    }
    spec.packing_seed = derive_seed(seed, 0);
    spec.validate();

    SensorModel sensor_base = cfg.contains("sensor") ? serialize::sensor_from_json(cfg.at("sensor")) : SensorModel{};
    const auto conditions = lighting_table(cfg.value("lighting", json("indoor")));
    const std::string scale_source = cfg.value("scale_source", std::string("annotation"));
    if (scale_source != "annotation" && scale_source != "sphere_detect") {
      throw Error(ErrorCode::InvalidArgument, "scale_source must be 'annotation' or 'sphere_detect'");
    }
    const std::string ext = cfg.value("image_format", std::string("pgm"));
    if (ext != "pgm" && ext != "png") throw Error(ErrorCode::InvalidArgument, "image_format must be 'pgm' or 'png'");
    const io::ImageFormat format = ext == "png" ? io::ImageFormat::Png : io::ImageFormat::Pgm;
    const json analysis = cfg.value("analysis", json::object());

    const Scene scene = generate_pile(spec);
    const auto frames = viewpoint_frames(scene.width_px, scene.height_px, layout.width, layout.height, layout.rows,
                                         layout.cols, layout.jitter_px, derive_seed(seed, 1));
    const auto sphere = sphere_in_pixels(scene);

    Tree tree;
    put_text(tree, "scene.json", serialize::dump(serialize::to_json(scene)));
    tree["truth_labels.pgm"] = io::encode_label_map(scene.truth_label_map);
    put_text(tree, "truth_distribution.csv", serialize::distribution_csv(scene.truth_distribution));

    json frames_json = json::array();
    std::vector<std::optional<std::string>> annotation_for(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& f = frames[i];
      const std::string idx = std::to_string(i);
      tree["frames/truth_" + idx + ".pgm"] =
          io::encode_label_map(crop(scene.truth_label_map, f.x, f.y, f.width, f.height));
      json fj = {{"index", i}, {"x_px", f.x}, {"y_px", f.y}, {"width_px", f.width}, {"height_px", f.height}};
      if (sphere) {
        const double cx = sphere->cx - f.x, cy = sphere->cy - f.y, r = sphere->radius;
        if (cx - r >= 0.0 && cy - r >= 0.0 && cx + r <= f.width && cy + r <= f.height) {
          const io::TracedCircle trace{cx, cy, r, spec.scale_sphere->diameter_mm};
          const std::string name = "frames/scale_" + idx + ".csv";
          put_text(tree, name, io::write_scale_annotation(std::span(&trace, 1)));
          annotation_for[i] = name;
          fj["scale_annotation"] = name;
        }
      }
      frames_json.push_back(fj);
    }
    if (scale_source == "annotation" && std::none_of(annotation_for.begin(), annotation_for.end(),
                                                     [](const auto& a) { return a.has_value(); })) {
      throw Error(ErrorCode::InvalidArgument, "annotation scale source needs a scale sphere fully inside one frame");
    }
    put_text(tree, "frames.json", serialize::dump({{"seed", seed}, {"frames", frames_json}}));

    json index = json::array();
    for (std::size_t k = 0; k < conditions.size(); ++k) {
      const LightingCondition& light = conditions[k];
      char prefix[8];
      std::snprintf(prefix, sizeof prefix, "%02zu", k + 1);
      const fs::path dir = fs::path("conditions") / (std::string(prefix) + "-" + slug(light.label));
      SensorModel sensor = sensor_base;
      sensor.rng_seed = derive_seed(seed, 100 + k);
      const Raster image = render(scene, light, sensor);

      json images = json::array();
      for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        const std::string name = "frame_" + std::to_string(i) + "." + ext;
        tree[dir / name] = io::encode_raster(crop(image, f.x, f.y, f.width, f.height), format);
        json entry = {{"path", name}, {"truth_labels", "../../frames/truth_" + std::to_string(i) + ".pgm"}};
        if (scale_source == "annotation" && annotation_for[i]) entry["annotation"] = "../../" + *annotation_for[i];
        images.push_back(entry);
      }
      json scale = scale_source == "annotation"
                       ? json{{"method", "annotation"}}
                       : json{{"method", "sphere_detect"}, {"diameter_mm", spec.scale_sphere ? spec.scale_sphere->diameter_mm : 60.0}};
      json analyze = {{"label", light.label},
                      {"lighting", serialize::to_json(light)},
                      {"images", images},
                      {"scale", scale},
                      {"reference", "../../truth_distribution.csv"}};
      for (auto it = analysis.begin(); it != analysis.end(); ++it) analyze[it.key()] = it.value();
      put_text(tree, dir / "analyze.json", serialize::dump(analyze));
      put_text(tree, dir / "lighting.json", serialize::dump(serialize::to_json(light)));
      index.push_back({{"label", light.label}, {"directory", dir.generic_string()},
                       {"pile_illuminance_lx", light.pile_illuminance_lx}, {"evenness", light.evenness},
                       {"sensor_seed", sensor.rng_seed}});
    }
    put_text(tree, "conditions.json", serialize::dump(index));

    for (const auto& [rel, bytes] : tree) {
      const fs::path p = options.out / rel;
      fs::create_directories(p.parent_path());
      io::write_file(p, bytes);
    }
    log << "synth: " << scene.particles.size() << " particles, " << conditions.size() << " conditions, "
        << frames.size() << " frames each -> " << options.out.string() << "\n";
    return kOk;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace granulometer::cli
