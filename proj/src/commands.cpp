#include "screekit/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "screekit/contact.hpp"
#include "screekit/detecteval.hpp"
#include "screekit/image.hpp"
#include "screekit/kinematics.hpp"
#include "screekit/planner.hpp"
#include "screekit/slippage.hpp"
#include "screekit/svg_plot.hpp"
#include "screekit/synth.hpp"
#include "screekit/telemetry.hpp"
#include "screekit/vegcover.hpp"

namespace screekit {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) fail(ErrorKind::parse, "cannot write " + path.string());
}

void write_json(const fs::path& path, const ordered_json& doc) { write_text(path, doc.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open file");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, "", std::string("invalid document: ") + e.what());
  }
}

void require_file(const fs::path& path, const char* what) {
  if (!fs::is_regular_file(path)) throw ParseError(path.string(), 0, "", fmt::format("{} not found", what));
}

// Defaults echoed into every report.
ordered_json defaults_block() {
  ordered_json d;
  d["exgi_threshold"] = kDefaultExgiThreshold;
  d["grid_spacing_m"] = kDefaultSpacing;
  d["dwell_s"] = kDefaultDwell;
  d["travel_speed_mps"] = kDefaultTravelSpeed;
  d["contact_threshold"] = kDefaultContactThreshold;
  d["contact_hysteresis"] = kDefaultContactHysteresis;
  return d;
}

std::optional<fs::path> config_file(const std::string& name) {
  const char* dir = std::getenv(kConfigDirVariable);
  if (!dir || !*dir) return std::nullopt;
  fs::path p = fs::path(dir) / name;
  if (fs::is_regular_file(p)) return p;
  return std::nullopt;
}

QuadrupedModel resolve_model(const std::string& flag) {
  if (!flag.empty()) {
    require_file(flag, "model file");
    return load_model(flag);
  }
  if (auto p = config_file("model.json")) return load_model(*p);
  return {};
}

ContactClassifier resolve_classifier(const std::string& flag) {
  if (!flag.empty()) {
    require_file(flag, "classifier file");
    return load_classifier(flag);
  }
  if (auto p = config_file("classifier.json")) return load_classifier(*p);
  return {};
}

std::string method_name(ForceMethod m) { return m == ForceMethod::quasi_static ? "quasi_static" : "full_id"; }
std::string mode_name(MapMode m) { return m == MapMode::paper_literal ? "paper_literal" : "pr_curve"; }

// ---------------------------------------------------------------------------
// Shared document builders (used by the single commands and by `report`)

struct SlipSettings {
  std::string model_path;
  std::string classifier_path;
  std::vector<double> window;
  ForceMethod method = ForceMethod::quasi_static;
  double threshold = kDefaultContactThreshold;
  double hysteresis = kDefaultContactHysteresis;
  bool horizontal_only = false;
  bool probability_weighting = false;
  int smoothing_window = kDefaultSmoothingWindow;
};

ordered_json slip_section(const TelemetryLog& log, const SlipSettings& st) {
  const QuadrupedModel model = resolve_model(st.model_path);
  const ContactClassifier classifier = resolve_classifier(st.classifier_path);
  ContactOptions copt;
  copt.method = st.method;
  copt.threshold = st.threshold;
  copt.hysteresis = st.hysteresis;
  copt.smoothing_window = st.smoothing_window;
  const ContactTimeline timeline = contact_timeline(log, model, classifier, copt);

  SlippageOptions sopt;
  if (!st.window.empty()) {
    if (st.window.size() != 2) fail(ErrorKind::usage, "--window expects t0,t1");
    sopt.window = std::make_pair(st.window[0], st.window[1]);
  }
  sopt.horizontal_only = st.horizontal_only;
  sopt.weighting = st.probability_weighting ? ContactWeighting::probabilities : ContactWeighting::states;
  const SlippageReport rep = slippage_metric(log, model, timeline, sopt);

  ordered_json doc;
  auto& settings = doc["settings"];
  settings["force_method"] = method_name(st.method);
  settings["contact_threshold"] = st.threshold;
  settings["contact_hysteresis"] = st.hysteresis;
  settings["weighting"] = st.probability_weighting ? "probabilities" : "states";
  settings["horizontal_only"] = st.horizontal_only;
  settings["smoothing_window"] = st.smoothing_window;
  settings["classifier"] = {{"beta0", classifier.beta0}, {"beta1", classifier.beta1}};
  ordered_json r;
  r["s"] = rep.s;
  r["base_distance"] = rep.base_distance;
  r["per_foot_slip_distance"] = ordered_json::object();
  ordered_json stance = ordered_json::object();
  for (Leg leg : kAllLegs) {
    const auto i = static_cast<std::size_t>(leg_index(leg));
    r["per_foot_slip_distance"][std::string(leg_name(leg))] = rep.per_foot_slip_distance[i];
    const auto& states = timeline.feet[i].state;
    const double frac = states.empty() ? 0.0
                                       : static_cast<double>(std::count(states.begin(), states.end(), 1)) /
                                             static_cast<double>(states.size());
    stance[std::string(leg_name(leg))] = frac;
  }
  r["t0"] = rep.t0;
  r["tf"] = rep.tf;
  doc["slippage"] = std::move(r);
  doc["stance_fraction"] = std::move(stance);
  return doc;
}

ordered_json attitude_section(const TelemetryLog& log) {
  const AttitudeExtremes ex = attitude_extremes(log);
  ordered_json a;
  a["max_abs_roll_deg"] = ex.max_abs_roll * kRadToDeg;
  a["max_abs_pitch_deg"] = ex.max_abs_pitch * kRadToDeg;
  a["max_total_inclination_deg"] = ex.max_total_inclination * kRadToDeg;
  a["mean_total_inclination_deg"] = ex.mean_total_inclination * kRadToDeg;
  return a;
}

ordered_json power_section(const TelemetryLog& log, double capacity, std::vector<std::string>& warnings) {
  try {
    const PowerSummary p = power_summary(log, capacity);
    ordered_json j;
    j["duration_s"] = p.duration;
    j["energy_wh"] = p.energy;
    j["mean_power_w"] = p.mean_power;
    j["pack_capacity_wh"] = capacity;
    j["battery_percent_used"] = p.battery_percent_used ? ordered_json(*p.battery_percent_used) : ordered_json(nullptr);
    return j;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::numeric) throw;
    warnings.push_back(std::string("power summary unavailable: ") + e.what());
    return nullptr;
  }
}

struct CoverSettings {
  std::string images;
  std::string masks;
  int threshold = kDefaultExgiThreshold;
  bool calibrate = false;
};

std::vector<fs::path> image_files(const fs::path& where) {
  if (fs::is_regular_file(where)) return {where};
  if (!fs::is_directory(where)) throw ParseError(where.string(), 0, "", "image path not found");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(where)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".png" || ext == ".ppm")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

fs::path find_mask(const fs::path& dir, const fs::path& image) {
  const std::string stem = image.stem().string();
  for (const auto& name : {stem + ".png", stem + ".pgm", stem + "_mask.png", stem + "_mask.pgm"}) {
    if (fs::is_regular_file(dir / name)) return dir / name;
  }
  throw ParseError((dir / stem).string(), 0, "", "no mask found for image '" + image.filename().string() + "'");
}

struct CoverResult {
  ordered_json doc;
  std::vector<std::pair<std::string, RgbImage>> overlays;
  std::vector<std::pair<std::string, GrayImage>> masks;
};

CoverResult cover_section(const CoverSettings& st) {
  if (st.calibrate && st.masks.empty()) fail(ErrorKind::usage, "--calibrate needs --masks");
  const auto files = image_files(st.images);
  if (files.empty()) throw ParseError(st.images, 0, "", "no .png or .ppm images found");
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, RgbImage>> images;
  std::vector<std::pair<RgbImage, GrayImage>> pairs;
  for (const auto& f : files) {
    LoadedRgb loaded = load_rgb(f);
    for (auto& w : loaded.warnings) warnings.push_back(f.filename().string() + ": " + w);
    if (!st.masks.empty()) pairs.emplace_back(loaded.image, load_mask(find_mask(st.masks, f)));
    images.emplace_back(f.stem().string(), std::move(loaded.image));
  }
  const int t = st.calibrate ? calibrate_threshold(pairs) : st.threshold;

  CoverResult res;
  auto& doc = res.doc;
  doc["threshold"] = t;
  doc["calibrated"] = st.calibrate;
  auto& rows = doc["images"] = ordered_json::array();
  double cover_sum = 0.0;
  double err_sum = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& [name, img] = images[i];
    const CoverReport c = cover_fraction(img, t);
    ordered_json row;
    row["name"] = name;
    row["cover_fraction"] = c.cover_fraction;
    row["vegetation_pixels"] = c.vegetation_pixels;
    row["total_pixels"] = c.total_pixels;
    if (!pairs.empty()) {
      const ConfusionMap cm = compare_with_mask(img, t, pairs[i].second);
      row["manual_cover"] = cm.manual_cover;
      row["abs_error_points"] = cm.abs_error_points;
      row["tp"] = cm.tp;
      row["tn"] = cm.tn;
      row["fp"] = cm.fp;
      row["fn"] = cm.fn;
      err_sum += cm.abs_error_points;
      res.overlays.emplace_back(name, render_overlay(cm));
    } else {
      res.masks.emplace_back(name, vegetation_mask(img, t));
    }
    cover_sum += c.cover_fraction;
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<double>(images.size());
  doc["mean_cover_fraction"] = cover_sum / n;
  doc["mean_abs_error_points"] = pairs.empty() ? ordered_json(nullptr) : ordered_json(err_sum / n);
  doc["warnings"] = warnings;
  return res;
}

std::string cover_csv(const ordered_json& doc) {
  std::string out = "name,cover_fraction,vegetation_pixels,total_pixels,manual_cover,abs_error_points\n";
  for (const auto& r : doc.at("images")) {
    out += fmt::format("{},{},{},{},", r.at("name").get<std::string>(), r.at("cover_fraction").get<double>(),
                       r.at("vegetation_pixels").get<std::size_t>(), r.at("total_pixels").get<std::size_t>());
    if (r.contains("manual_cover")) {
      out += fmt::format("{},{}\n", r.at("manual_cover").get<double>(), r.at("abs_error_points").get<double>());
    } else {
      out += ",\n";
    }
  }
  return out;
}

ordered_json eval_row_json(const EvalRow& row) {
  ordered_json j;
  j["name"] = row.name;
  j["class_id"] = row.class_id;
  j["precision"] = row.precision;
  j["recall"] = row.recall;
  j["map50"] = row.map50;
  j["map50_95"] = row.map50_95;
  j["tp"] = row.counts.tp;
  j["fp"] = row.counts.fp;
  j["fn"] = row.counts.fn;
  j["precision_undefined"] = row.precision_undefined;
  j["recall_undefined"] = row.recall_undefined;
  return j;
}

ordered_json eval_section(const EvalReport& rep, double min_conf) {
  ordered_json doc;
  doc["mode"] = mode_name(rep.mode);
  doc["min_confidence"] = min_conf;
  doc["iou_thresholds"] = rep.iou_thresholds;
  doc["all"] = eval_row_json(rep.all);
  doc["classes"] = ordered_json::array();
  for (const auto& row : rep.classes) doc["classes"].push_back(eval_row_json(row));
  doc["warnings"] = rep.warnings;
  return doc;
}

std::string eval_csv(const EvalReport& rep) {
  std::string out = "class,precision,recall,map50,map50_95,tp,fp,fn\n";
  auto line = [&](const EvalRow& r) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.name, r.precision, r.recall, r.map50, r.map50_95, r.counts.tp,
                       r.counts.fp, r.counts.fn);
  };
  line(rep.all);
  for (const auto& r : rep.classes) line(r);
  return out;
}

MapMode parse_mode(const std::string& s) {
  if (s == "paper_literal") return MapMode::paper_literal;
  if (s == "pr_curve") return MapMode::pr_curve;
  fail(ErrorKind::usage, "unknown --mode '" + s + "' (expected paper_literal or pr_curve)");
}

ForceMethod parse_method(const std::string& s) {
  if (s == "quasi_static") return ForceMethod::quasi_static;
  if (s == "full_id") return ForceMethod::full_id;
  fail(ErrorKind::usage, "unknown --method '" + s + "' (expected quasi_static or full_id)");
}

// ---------------------------------------------------------------------------
// Summary plots

std::vector<double> times_of(const TelemetryLog& log) {
  std::vector<double> t;
  t.reserve(log.samples.size());
  for (const auto& s : log.samples) t.push_back(s.t);
  return t;
}

std::string attitude_plot(const TelemetryLog& log) {
  PlotSeries roll{"roll", times_of(log), {}, "#1f77b4"};
  PlotSeries pitch{"pitch", roll.x, {}, "#ff7f0e"};
  PlotSeries total{"total inclination", roll.x, {}, "#2ca02c"};
  for (const auto& s : log.samples) {
    const BaseAttitude a = attitude_of(s);
    roll.y.push_back(a.roll * kRadToDeg);
    pitch.y.push_back(a.pitch * kRadToDeg);
    total.y.push_back(a.total_inclination * kRadToDeg);
  }
  return svg_line_plot({"Base inclination", "time [s]", "angle [deg]"}, {roll, pitch, total});
}

std::string power_plot(const TelemetryLog& log) {
  return svg_line_plot({"Power usage", "time [s]", "power [W]"}, {{"power", times_of(log), power_series(log), "#d62728"}});
}

std::string energy_plot(const TelemetryLog& log, double capacity) {
  const auto t = times_of(log);
  const auto p = power_series(log);
  PlotSeries energy{"energy", t, {0.0}, "#9467bd"};
  PlotSeries battery{"battery used [%]", t, {0.0}, "#8c564b"};
  double e = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    e += 0.5 * (p[i] + p[i - 1]) * (t[i] - t[i - 1]) / 3600.0;
    energy.y.push_back(e);
    battery.y.push_back(100.0 * e / capacity);
  }
  return svg_line_plot({"Energy and battery usage", "time [s]", "Wh / %"}, {energy, battery});
}

std::string plan_plot(const MissionPlan& plan) {
  PlotSeries path{"mission path", {plan.start_point.x()}, {plan.start_point.y()}, "#1f77b4"};
  for (const auto& wp : plan.waypoints) {
    path.x.push_back(wp.position.x());
    path.y.push_back(wp.position.y());
  }
  path.x.push_back(plan.start_point.x());
  path.y.push_back(plan.start_point.y());
  return svg_line_plot({"Waypoint mission " + plan.plot_name, "x [m]", "y [m]", 480, 480}, {path});
}

// ---------------------------------------------------------------------------
// synth

void write_detections(const fs::path& dir, const SynthDetections& det) {
  write_yolo_txt(dir / "gt", det.gt, AnnotationKind::gt);
  write_yolo_txt(dir / "pred", det.pred, AnnotationKind::pred);
  ordered_json counts;
  auto counts_json = [](const DetectionCounts& c) { return ordered_json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}}; };
  counts["iou_threshold"] = 0.5;
  counts["total"] = counts_json(det.expected);
  counts["per_class"] = ordered_json::object();
  for (const auto& [cls, c] : det.expected_per_class) counts["per_class"][std::to_string(cls)] = counts_json(c);
  write_json(dir / "expected_counts.json", counts);
}

ordered_json preset_scenario(const std::string& preset, std::uint64_t seed, int slips) {
  GaitScenario sc;
  if (preset == "standing") sc = standing_scenario(6.0, seed);
  else if (preset == "straight_walk") sc = straight_walk_scenario(8.0, 0.4, seed);
  else if (preset == "turning_walk" || preset == "mission") sc = turning_walk_scenario(8.0, 0.3, 0.25, seed);
  else fail(ErrorKind::usage, "unknown --preset '" + preset + "' (standing, straight_walk, turning_walk, mission)");
  Rng rng(seed);
  add_random_slips(sc, slips, rng);
  ordered_json doc;
  doc["gait"] = scenario_to_json(sc);
  if (preset == "mission") {
    doc["images"] = ordered_json::array();
    for (int i = 0; i < 3; ++i) {
      ImageSpec s;
      s.name = fmt::format("plot_{:02d}", i);
      s.pattern = ImagePattern::scene;
      s.width = 160;
      s.height = 120;
      s.fraction = 0.15 + 0.1 * i;
      s.seed = seed * 10 + static_cast<std::uint64_t>(i);
      doc["images"].push_back(image_spec_to_json(s));
    }
    DetectionSceneSpec ds;
    ds.images = 4;
    ds.jitter = 0.1;
    ds.missed_per_image = 1;
    ds.planted_fp_per_image = 1;
    auto det = detection_spec_to_json(ds);
    det["seed"] = seed;
    doc["detections"] = det;
  }
  return doc;
}

int cmd_synth(const std::string& scenario_path, const std::string& preset, std::uint64_t seed, int slips,
              const std::string& model_path, const fs::path& out_dir, std::ostream& out) {
  if (scenario_path.empty() == preset.empty()) fail(ErrorKind::usage, "give exactly one of --scenario or --preset");
  nlohmann::json doc;
  if (!scenario_path.empty()) {
    require_file(scenario_path, "scenario file");
    doc = read_json(scenario_path);
  } else {
    doc = preset_scenario(preset, seed, slips);
  }
  // A bare gait scenario is accepted as well as the sectioned form.
  if (doc.contains("duration")) doc = nlohmann::json{{"gait", doc}};
  if (!doc.contains("gait") && !doc.contains("images") && !doc.contains("detections")) {
    throw ParseError(scenario_path, 0, "", "scenario has none of the sections gait, images, detections");
  }

  fs::create_directories(out_dir);
  ordered_json echo;
  std::size_t written = 0;
  if (doc.contains("gait")) {
    const GaitScenario sc = scenario_from_json(doc.at("gait"));
    const SynthTelemetry st = synth_telemetry(sc, resolve_model(model_path));
    std::ostringstream log_text;
    write_log(log_text, st.log);
    write_text(out_dir / "telemetry.jsonl", log_text.str());
    write_json(out_dir / "sidecar.json", sidecar_to_json(st.sidecar));
    echo["gait"] = scenario_to_json(sc);
    written += 2;
  }
  if (doc.contains("images")) {
    echo["images"] = ordered_json::array();
    for (const auto& spec_doc : doc.at("images")) {
      const ImageSpec spec = image_spec_from_json(spec_doc);
      const SynthImage img = synth_image(spec);
      fs::create_directories(out_dir / "images");
      fs::create_directories(out_dir / "masks");
      write_png(out_dir / "images" / (spec.name + ".png"), img.image);
      write_mask_png(out_dir / "masks" / (spec.name + ".png"), img.mask);
      echo["images"].push_back(image_spec_to_json(spec));
      written += 2;
    }
  }
  if (doc.contains("detections")) {
    const auto& d = doc.at("detections");
    const DetectionSceneSpec spec = detection_spec_from_json(d);
    const auto dseed = d.value("seed", std::uint64_t{0});
    write_detections(out_dir, synth_detections(spec, dseed));
    auto e = detection_spec_to_json(spec);
    e["seed"] = dseed;
    echo["detections"] = e;
    written += 3;
  }
  write_json(out_dir / "scenario.json", echo);
  out << fmt::format("wrote {} fixture files to {}\n", written + 1, out_dir.string());
  return 0;
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return 1;
    case ErrorKind::parse: return 2;
    case ErrorKind::numeric: return 3;
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Field analytics for legged-robot habitat monitoring missions", "screekit"};
  app.require_subcommand(1);

  // slip
  SlipSettings slip;
  std::string slip_log, slip_out, slip_method = "quasi_static";
  auto* c_slip = app.add_subcommand("slip", "Slippage metric of a telemetry log");
  c_slip->add_option("--log", slip_log, "Telemetry log (JSON Lines)")->required();
  c_slip->add_option("--model", slip.model_path, "Robot model document");
  c_slip->add_option("--classifier", slip.classifier_path, "Contact classifier document");
  c_slip->add_option("--window", slip.window, "Time window t0,t1 in seconds")->delimiter(',')->expected(2);
  c_slip->add_option("--method", slip_method, "Force estimator: quasi_static or full_id")->capture_default_str();
  c_slip->add_option("--threshold", slip.threshold, "Contact probability threshold")->capture_default_str();
  c_slip->add_option("--hysteresis", slip.hysteresis, "Contact hysteresis band")->capture_default_str();
  c_slip->add_flag("--horizontal-only", slip.horizontal_only, "Use horizontal speeds only");
  c_slip->add_flag("--probability-weighting", slip.probability_weighting, "Weight by contact probability");
  c_slip->add_option("--smoothing-window", slip.smoothing_window, "Samples in the acceleration fit")->capture_default_str();
  c_slip->add_option("--out", slip_out, "Report document")->required();

  // vegcover
  CoverSettings cover;
  std::string cover_out;
  auto* c_cover = app.add_subcommand("vegcover", "Vegetation cover from RGB images");
  c_cover->add_option("--images", cover.images, "Image file or directory (.png, .ppm)")->required();
  auto* thr = c_cover->add_option("--threshold", cover.threshold, "ExGI threshold")->capture_default_str();
  c_cover->add_flag("--calibrate", cover.calibrate, "Fit the threshold against --masks")->excludes(thr);
  c_cover->add_option("--masks", cover.masks, "Directory with manual masks");
  c_cover->add_option("--out", cover_out, "Output directory")->required();

  // plan
  std::string plot_path, plot_name = "plot", plan_out;
  double plot_w = 0.0, plot_h = 0.0, spacing = kDefaultSpacing, dwell = kDefaultDwell, speed = kDefaultTravelSpeed;
  std::vector<double> start;
  auto* c_plan = app.add_subcommand("plan", "Waypoint mission over a rectangular plot");
  auto* o_plot = c_plan->add_option("--plot", plot_path, "Plot document");
  auto* o_w = c_plan->add_option("--width", plot_w, "Plot width in m (instead of --plot)");
  auto* o_h = c_plan->add_option("--height", plot_h, "Plot height in m (instead of --plot)");
  o_plot->excludes(o_w)->excludes(o_h);
  c_plan->add_option("--name", plot_name, "Plot name when given by size");
  c_plan->add_option("--spacing", spacing, "Grid spacing in m")->capture_default_str();
  c_plan->add_option("--start", start, "Start point x,y in plot coordinates")->delimiter(',')->expected(2);
  c_plan->add_option("--dwell", dwell, "Dwell per waypoint in s")->capture_default_str();
  c_plan->add_option("--speed", speed, "Travel speed in m/s")->capture_default_str();
  c_plan->add_option("--out", plan_out, "Output directory")->required();

  // eval-det
  std::string gt_dir, pred_dir, mode = "paper_literal", eval_out;
  double min_conf = 0.0;
  auto* c_eval = app.add_subcommand("eval-det", "Detection metrics from YOLO txt annotations");
  c_eval->add_option("--gt-dir", gt_dir, "Ground-truth directory")->required();
  c_eval->add_option("--pred-dir", pred_dir, "Prediction directory")->required();
  c_eval->add_option("--mode", mode, "paper_literal or pr_curve")->capture_default_str();
  c_eval->add_option("--min-conf", min_conf, "Drop predictions below this confidence")->capture_default_str();
  c_eval->add_option("--out", eval_out, "Output file (.json, .csv, or text table)")->required();

  // summary
  std::string sum_log, sum_out;
  double capacity = kDefaultPackCapacityWh;
  auto* c_sum = app.add_subcommand("summary", "Attitude and power summary with plots");
  c_sum->add_option("--log", sum_log, "Telemetry log (JSON Lines)")->required();
  c_sum->add_option("--capacity", capacity, "Battery pack capacity in Wh")->capture_default_str();
  c_sum->add_option("--out", sum_out, "Output directory")->required();

  // synth
  std::string scenario_path, preset, synth_model, synth_out;
  std::uint64_t seed = 1;
  int slips = 0;
  auto* c_synth = app.add_subcommand("synth", "Synthetic fixtures with ground-truth sidecars");
  c_synth->add_option("--scenario", scenario_path, "Scenario document");
  c_synth->add_option("--preset", preset, "standing, straight_walk, turning_walk or mission");
  c_synth->add_option("--seed", seed, "Seed for --preset")->capture_default_str();
  c_synth->add_option("--slips", slips, "Slip episodes for --preset")->capture_default_str();
  c_synth->add_option("--model", synth_model, "Robot model document");
  c_synth->add_option("--out-dir", synth_out, "Output directory")->required();

  // report
  SlipSettings rep_slip;
  std::string mission_dir, rep_out, rep_method = "quasi_static", rep_mode = "paper_literal";
  int rep_threshold = kDefaultExgiThreshold;
  double rep_capacity = kDefaultPackCapacityWh;
  auto* c_rep = app.add_subcommand("report", "Mission report bundle from a mission directory");
  c_rep->add_option("--mission-dir", mission_dir, "Directory with telemetry.jsonl and optional images/, masks/, gt/, pred/")->required();
  c_rep->add_option("--model", rep_slip.model_path, "Robot model document");
  c_rep->add_option("--classifier", rep_slip.classifier_path, "Contact classifier document");
  c_rep->add_option("--method", rep_method, "Force estimator")->capture_default_str();
  c_rep->add_option("--threshold", rep_threshold, "ExGI threshold")->capture_default_str();
  c_rep->add_option("--capacity", rep_capacity, "Battery pack capacity in Wh")->capture_default_str();
  c_rep->add_option("--mode", rep_mode, "Detection mAP mode")->capture_default_str();
  c_rep->add_option("--out", rep_out, "Report document")->required();

  // fit-classifier
  std::string fit_data, fit_out;
  double fit_l2 = 0.0;
  auto* c_fit = app.add_subcommand("fit-classifier", "Fit the contact classifier to labelled vertical forces");
  c_fit->add_option("--data", fit_data, "Training file: lines of 'f_vertical label'")->required();
  c_fit->add_option("--l2", fit_l2, "L2 penalty on the force coefficient")->capture_default_str();
  c_fit->add_option("--out", fit_out, "Classifier document")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (c_slip->parsed()) {
      require_file(slip_log, "telemetry log");
      slip.method = parse_method(slip_method);
      const TelemetryLog log = parse_log(fs::path(slip_log));
      ordered_json doc;
      doc["command"] = "slip";
      doc["mission"] = log.metadata.mission;
      doc["plot"] = log.metadata.plot;
      doc["defaults"] = defaults_block();
      doc.update(slip_section(log, slip));
      write_json(slip_out, doc);
      out << fmt::format("s = {:.6g} over {:.6g} m of base travel\n", doc["slippage"]["s"].get<double>(),
                         doc["slippage"]["base_distance"].get<double>());
    } else if (c_cover->parsed()) {
      CoverResult res = cover_section(cover);
      ordered_json doc;
      doc["command"] = "vegcover";
      doc["defaults"] = defaults_block();
      doc.update(res.doc);
      const fs::path dir(cover_out);
      fs::create_directories(dir);
      write_json(dir / "cover.json", doc);
      write_text(dir / "cover.csv", cover_csv(doc));
      if (!res.overlays.empty()) fs::create_directories(dir / "overlays");
      for (const auto& [name, img] : res.overlays) write_png(dir / "overlays" / (name + "_overlay.png"), img);
      for (const auto& [name, m] : res.masks) {
        fs::create_directories(dir / "masks");
        write_mask_png(dir / "masks" / (name + "_vegetation.png"), m);
      }
      for (const auto& w : doc["warnings"]) err << "warning: " << w.get<std::string>() << "\n";
      out << fmt::format("threshold {}: mean cover {:.4f} over {} images\n", doc["threshold"].get<int>(),
                         doc["mean_cover_fraction"].get<double>(), doc["images"].size());
    } else if (c_plan->parsed()) {
      PlotSpec plot;
      if (!plot_path.empty()) {
        require_file(plot_path, "plot file");
        plot = load_plot(plot_path);
      } else if (o_w->count() && o_h->count()) {
        plot.name = plot_name;
        plot.width = plot_w;
        plot.height = plot_h;
      } else {
        fail(ErrorKind::usage, "give --plot or both --width and --height");
      }
      for (const auto& w : plot.validate()) err << "warning: " << w << "\n";
      const WaypointGrid grid = grid_waypoints(plot, spacing);
      const SerpentineOrder order = serpentine_order(grid.rows, grid.cols, grid.spacing);
      const Eigen::Vector2d start_point =
          start.empty() ? Eigen::Vector2d(-spacing, -spacing) : Eigen::Vector2d(start[0], start[1]);
      const MissionPlan plan = mission_with_return(grid, order, start_point, dwell, speed, plot.name);
      const fs::path dir(plan_out);
      fs::create_directories(dir);
      export_plan(plan, dir / "plan.json");
      export_plan(plan, dir / "plan.csv");
      write_text(dir / "plan.svg", plan_plot(plan));
      out << fmt::format("{} waypoints, grid path {:g} m, total {:g} m, {:g} s\n", plan.waypoints.size(),
                         plan.grid_length, plan.total_length, plan.duration);
    } else if (c_eval->parsed()) {
      const MapMode m = parse_mode(mode);
      if (!fs::is_directory(gt_dir)) throw ParseError(gt_dir, 0, "", "ground-truth directory not found");
      if (!fs::is_directory(pred_dir)) throw ParseError(pred_dir, 0, "", "prediction directory not found");
      AnnotationSet gt = load_yolo_txt(gt_dir, AnnotationKind::gt);
      AnnotationSet pred = load_yolo_txt(pred_dir, AnnotationKind::pred);
      const EvalReport rep = map_scores(gt, pred, m, min_conf);
      const fs::path path(eval_out);
      const std::string table = render_table(rep);
      if (path.extension() == ".json") {
        ordered_json doc;
        doc["command"] = "eval-det";
        doc["defaults"] = defaults_block();
        doc.update(eval_section(rep, min_conf));
        write_json(path, doc);
      } else if (path.extension() == ".csv") {
        write_text(path, eval_csv(rep));
      } else {
        write_text(path, table);
      }
      for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
      out << table;
    } else if (c_sum->parsed()) {
      require_file(sum_log, "telemetry log");
      const TelemetryLog log = parse_log(fs::path(sum_log));
      std::vector<std::string> warnings;
      ordered_json doc;
      doc["command"] = "summary";
      doc["mission"] = log.metadata.mission;
      doc["plot"] = log.metadata.plot;
      doc["defaults"] = defaults_block();
      doc["attitude"] = attitude_section(log);
      doc["power"] = power_section(log, capacity, warnings);
      doc["warnings"] = warnings;
      const fs::path dir(sum_out);
      fs::create_directories(dir);
      write_json(dir / "summary.json", doc);
      write_text(dir / "attitude.svg", attitude_plot(log));
      if (!doc["power"].is_null()) {
        write_text(dir / "power.svg", power_plot(log));
        write_text(dir / "energy.svg", energy_plot(log, capacity));
      }
      for (const auto& w : warnings) err << "warning: " << w << "\n";
      out << fmt::format("max total inclination {:.3f} deg\n", doc["attitude"]["max_total_inclination_deg"].get<double>());
    } else if (c_synth->parsed()) {
      return cmd_synth(scenario_path, preset, seed, slips, synth_model, synth_out, out);
    } else if (c_fit->parsed()) {
      require_file(fit_data, "training file");
      const auto data = load_training_data(fit_data);
      const ContactClassifier c = fit_classifier(data, {.l2 = fit_l2});
      save_classifier(fit_out, c);
      out << fmt::format("beta0 = {:.6g}, beta1 = {:.6g} from {} samples\n", c.beta0, c.beta1, data.size());
    } else if (c_rep->parsed()) {
      const fs::path dir(mission_dir);
      if (!fs::is_directory(dir)) throw ParseError(dir.string(), 0, "", "mission directory not found");
      require_file(dir / "telemetry.jsonl", "telemetry log");
      rep_slip.method = parse_method(rep_method);
      const MapMode m = parse_mode(rep_mode);
      const TelemetryLog log = parse_log(dir / "telemetry.jsonl");
      std::vector<std::string> warnings;
      ordered_json doc;
      doc["command"] = "report";
      doc["mission"] = log.metadata.mission;
      doc["plot"] = log.metadata.plot;
      doc["defaults"] = defaults_block();
      try {
        const ordered_json s = slip_section(log, rep_slip);
        doc["contact_settings"] = s["settings"];
        doc["slippage"] = s["slippage"];
        doc["stance_fraction"] = s["stance_fraction"];
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::numeric) throw;
        warnings.push_back(std::string("slippage unavailable: ") + e.what());
        doc["slippage"] = nullptr;
      }
      doc["attitude"] = attitude_section(log);
      doc["power"] = power_section(log, rep_capacity, warnings);
      if (fs::is_directory(dir / "images")) {
        CoverSettings cs;
        cs.images = (dir / "images").string();
        if (fs::is_directory(dir / "masks")) cs.masks = (dir / "masks").string();
        cs.threshold = rep_threshold;
        doc["cover"] = cover_section(cs).doc;
      } else {
        doc["cover"] = nullptr;
      }
      if (fs::is_directory(dir / "gt") && fs::is_directory(dir / "pred")) {
        const EvalReport rep = map_scores(load_yolo_txt(dir / "gt", AnnotationKind::gt),
                                          load_yolo_txt(dir / "pred", AnnotationKind::pred), m, 0.0);
        doc["detection"] = eval_section(rep, 0.0);
      } else {
        doc["detection"] = nullptr;
      }
      doc["warnings"] = warnings;
      write_json(rep_out, doc);
      for (const auto& w : warnings) err << "warning: " << w << "\n";
      out << "report written to " << rep_out << "\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace screekit
