// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "screekit/commands.hpp"
#include "screekit/contact.hpp"
#include "screekit/detecteval.hpp"
#include "screekit/planner.hpp"
#include "screekit/synth.hpp"
#include "screekit/telemetry.hpp"
#include "screekit/vegcover.hpp"

using namespace screekit;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("screekit_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  return run_cli(args, out, err);
}

Outcome slippage_suite() {
  const fs::path dir = scratch("slip");
  const auto t0 = Clock::now();
  Outcome o;
  double worst = 0.0;
  int n = 0;
  for (const GaitScenario& sc : standard_scenario_suite()) {
    const SynthTelemetry st = synth_telemetry(sc);
    const fs::path log = dir / (sc.name + ".jsonl");
    const fs::path rep = dir / (sc.name + ".json");
    write_log(log, st.log);
    if (run({"slip", "--log", log.string(), "--out", rep.string()}) != 0 || !st.sidecar.s) {
      o.pass = false;
      o.detail += " " + sc.name + ":error";
      continue;
    }
    const double s = nlohmann::json::parse(slurp(rep))["slippage"]["s"].get<double>();
    const double truth = *st.sidecar.s;
    const bool zero = sc.slips.empty();
    const double err = zero ? std::abs(s - truth) : std::abs(s - truth) / truth;
    const bool ok = zero ? err <= 1e-6 : err <= 0.02;
    if (!zero) worst = std::max(worst, err);
    if (!ok) {
      o.pass = false;
      o.detail += fmt::format(" {}:{:.3g}", sc.name, err);
    }
    ++n;
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= 5.0) o.pass = false;
  o.detail = fmt::format("{} scenarios, worst relative error {:.3g}, {:.2f} s{}", n, worst, elapsed, o.detail);
  return o;
}

Outcome force_round_trip() {
  const QuadrupedModel m;
  std::mt19937 gen(2024);
  std::uniform_real_distribution<double> haa(-0.4, 0.4), hfe(-0.9, 0.9), kfe(-2.3, -0.4), fxy(-60.0, 60.0),
      fz(0.0, 300.0);
  Outcome o;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    TelemetrySample s;
    s.base_orientation = quaternion_from_rpy(haa(gen), haa(gen), 3.0 * haa(gen));
    std::array<Eigen::Vector3d, 4> truth;
    for (Leg leg : kAllLegs) {
      const int j = 3 * leg_index(leg);
      s.joint_pos.segment<3>(j) = Eigen::Vector3d(haa(gen), hfe(gen), kfe(gen));
    }
    for (Leg leg : kAllLegs) {
      const auto k = static_cast<std::size_t>(leg_index(leg));
      truth[k] = Eigen::Vector3d(fxy(gen), fxy(gen), fz(gen));
      s.joint_torque.segment<3>(3 * leg_index(leg)) = torques_from_force(m, s, leg, truth[k]);
    }
    const auto est = estimate_contact_forces(m, s);
    for (std::size_t k = 0; k < 4; ++k) {
      if (!est.feet[k].valid) {
        o.pass = false;
        continue;
      }
      worst = std::max(worst, (est.feet[k].force - truth[k]).norm() / truth[k].norm());
    }
  }
  if (worst > 1e-9) o.pass = false;

  TelemetrySample singular;
  singular.joint_pos.segment<3>(0) = Eigen::Vector3d(0.0, 0.3, 0.0);
  singular.joint_pos.segment<3>(3) = Eigen::Vector3d(0.0, 0.3, -1.2);
  singular.joint_torque.setConstant(4.0);
  const auto est = estimate_contact_forces(m, singular);
  const bool flagged = !est.feet[0].valid && est.feet[1].valid;
  if (!flagged) o.pass = false;
  o.detail = fmt::format("1000 configurations, worst relative error {:.2e}, singular leg flagged: {}", worst,
                         flagged ? "yes" : "no");
  return o;
}

std::vector<LabeledForceSample> draw(std::uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<LabeledForceSample> out;
  for (int i = 0; i < n; ++i) {
    const double f = rng.uniform(0.0, 150.0);
    const double p = 1.0 / (1.0 + std::exp(-(-3.0 + 0.06 * f)));
    out.push_back({f, rng.uniform() < p ? 1 : 0});
  }
  return out;
}

Outcome classifier_recovery() {
  const auto t0 = Clock::now();
  const auto train = draw(7, 10000);
  const ContactClassifier fit = fit_classifier(train);
  const auto fresh = draw(8, 10000);
  const ContactClassifier truth{};
  int agree = 0;
  for (const auto& s : fresh) {
    agree += ((contact_probability(fit, s.f_vertical) >= 0.5) == (contact_probability(truth, s.f_vertical) >= 0.5)) ? 1 : 0;
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = agree >= 9900 && elapsed < 2.0;
  o.detail = fmt::format("beta0 {:.4f}, beta1 {:.5f}, agreement {:.2f}%, {:.2f} s", fit.beta0, fit.beta1,
                         agree / 100.0, elapsed);
  return o;
}

Outcome exgi_cover() {
  ImageSpec half;
  half.width = 64;
  half.height = 48;
  const double half_cover = cover_fraction(synth_image(half).image).cover_fraction;
  auto bench = [](SceneContrast c) {
    std::vector<std::pair<RgbImage, GrayImage>> pairs;
    for (const auto& spec : cover_benchmark(c)) {
      auto img = synth_image(spec);
      pairs.emplace_back(std::move(img.image), std::move(img.mask));
    }
    return mean_cover_error(pairs, kDefaultExgiThreshold);
  };
  const double high = bench(SceneContrast::high);
  const double low = bench(SceneContrast::low);
  Outcome o;
  o.pass = half_cover == 0.5 && high < 1.0 && low <= 3.0;
  o.detail = fmt::format("half-green cover {}, high-contrast error {:.3f} pp, low-contrast error {:.3f} pp", half_cover,
                         high, low);
  return o;
}

Outcome detection_eval() {
  Outcome o;
  int agree = 0;
  bool literal = true;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto det = synth_detections(random_scene_spec(seed), seed);
    const auto greedy = match_detections(det.gt, det.pred, 0.5);
    const auto oracle = exhaustive_match_counts(det.gt, det.pred, 0.5);
    bool same = oracle.size() <= greedy.per_class.size();
    for (const auto& [cls, c] : oracle) {
      const auto it = greedy.per_class.find(cls);
      same = same && it != greedy.per_class.end() && it->second.tp == c.tp && it->second.fp == c.fp &&
             it->second.fn == c.fn;
    }
    agree += same ? 1 : 0;
    const EvalReport rep = map_scores(det.gt, det.pred, MapMode::paper_literal);
    literal = literal && rep.all.map50 == rep.all.precision;
    for (const auto& row : rep.classes) literal = literal && row.map50 == row.precision;
  }

  AnnotationSet gt, pred;
  gt.class_names = pred.class_names = default_class_names();
  const double shift = 0.2 * 0.3 / 1.7;  // IoU 0.7 for a 0.1 x 0.2 box shifted along its height
  for (int c = 0; c < 6; ++c) {
    BBox g{c, 0.15 + 0.14 * c, 0.5, 0.1, 0.2, std::nullopt};
    BBox p = g;
    p.cy += shift;
    p.confidence = 0.9;
    gt.images["scene"].push_back(g);
    pred.images["scene"].push_back(p);
  }
  const double m5095 = map_scores(gt, pred).all.map50_95;
  o.pass = agree == 100 && literal && m5095 == 0.5;
  o.detail = fmt::format("greedy = exhaustive on {}/100 scenes, mAP50 = precision@0.5: {}, IoU-0.7 mAP50-95 = {}",
                         agree, literal ? "yes" : "no", m5095);
  return o;
}

double brute_force_path(const WaypointGrid& g) {
  std::vector<int> perm(g.waypoints.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    double len = 0.0;
    for (std::size_t k = 1; k < perm.size(); ++k) {
      len += (g.waypoints[static_cast<std::size_t>(perm[k])] - g.waypoints[static_cast<std::size_t>(perm[k - 1])]).norm();
    }
    best = std::min(best, len);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Outcome planner() {
  Outcome o;
  int checked = 0;
  for (int rows = 1; rows <= 9; ++rows) {
    for (int cols = 1; rows * cols <= 9; ++cols) {
      PlotSpec p;
      p.width = cols;
      p.height = rows;
      const WaypointGrid g = grid_waypoints(p, 1.0);
      const SerpentineOrder s = serpentine_order(rows, cols, 1.0);
      const bool ok = std::abs(s.length - (rows * cols - 1)) < 1e-12 && std::abs(s.length - brute_force_path(g)) < 1e-9;
      o.pass = o.pass && ok;
      ++checked;
    }
  }
  auto plan = [](const char* name, double w, double h) {
    PlotSpec p;
    p.name = name;
    p.width = w;
    p.height = h;
    const WaypointGrid g = grid_waypoints(p);
    return mission_with_return(g, serpentine_order(g.rows, g.cols, g.spacing), {-1.0, -1.0});
  };
  const MissionPlan ni1 = plan("NI 1", 4.0, 4.0);
  const MissionPlan ni2 = plan("NI 2", 7.0, 2.0);
  o.pass = o.pass && ni1.waypoints.size() == 16 && std::abs(ni1.grid_length - 15.0) < 1e-12 &&
           ni2.waypoints.size() == 14 && std::abs(ni2.grid_length - 13.0) < 1e-12;
  o.detail = fmt::format("{} small grids optimal, NI 1: {} waypoints / {:g} m, NI 2: {} waypoints / {:g} m", checked,
                         ni1.waypoints.size(), ni1.grid_length, ni2.waypoints.size(), ni2.grid_length);
  return o;
}

Outcome telemetry() {
  TelemetryLog log;
  for (int k = 0; k <= 600; ++k) {
    TelemetrySample s;
    s.t = k;
    s.battery_voltage = 52.0;
    s.battery_current = 5.0;
    log.samples.push_back(s);
  }
  const double energy = power_summary(log).energy;
  const double deg = std::numbers::pi / 180.0;
  const double incl = total_inclination(20.0 * deg, 20.0 * deg) / deg;
  const double incl_q = attitude_of(quaternion_from_rpy(20.0 * deg, 20.0 * deg, 0.0)).total_inclination / deg;

  AnnotationSet gt;
  gt.class_names = default_class_names();
  for (int c = 0; c < 6; ++c) gt.images["img"].push_back(BBox{c, 0.1 + 0.15 * c, 0.5, 0.1, 0.1, std::nullopt});
  AnnotationSet pred = gt;
  for (auto& b : pred.images["img"]) b.confidence = 0.8;
  const std::string table = render_table(map_scores(gt, pred));
  bool names = true;
  for (const auto& n : default_class_names()) names = names && table.find(n) != std::string::npos;

  Outcome o;
  o.pass = std::abs(energy - 260.0 * 600.0 / 3600.0) <= 1e-9 && std::abs(incl - 28.06) <= 0.01 &&
           std::abs(incl_q - 28.06) <= 0.01 && names;
  o.detail = fmt::format("energy {:.9f} Wh (want {:.9f}), inclination {:.4f} deg (want 28.06 +- 0.01), "
                         "species names in table: {}",
                         energy, 260.0 * 600.0 / 3600.0, incl, names ? "yes" : "no");
  return o;
}

// Runs the real binary twice per command into the same place and compares
// every output file plus stdout.
Outcome determinism() {
  const fs::path work = scratch("determinism");
  const std::string cli = SCREEKIT_CLI_PATH;
  const fs::path mission = work / "mission";
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "synth --preset mission --seed 11 --slips 2 --out-dir " + mission.string()},
      {"slip", "slip --log " + (mission / "telemetry.jsonl").string() + " --out OUT/slip.json"},
      {"vegcover", "vegcover --images " + (mission / "images").string() + " --masks " + (mission / "masks").string() +
                       " --out OUT"},
      {"plan", "plan --width 4 --height 4 --name 'NI 1' --out OUT"},
      {"eval-det", "eval-det --gt-dir " + (mission / "gt").string() + " --pred-dir " + (mission / "pred").string() +
                       " --out OUT/eval.json"},
      {"summary", "summary --log " + (mission / "telemetry.jsonl").string() + " --out OUT"},
      {"report", "report --mission-dir " + mission.string() + " --out OUT/report.json"},
  };
  auto snapshot = [](const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return files;
  };
  Outcome o;
  std::vector<std::string> bad;
  // The mission fixture is produced first so the other commands have inputs.
  for (const auto& [name, args] : commands) {
    const fs::path out = (name == "synth") ? mission : work / name;
    std::string line = args;
    for (auto pos = line.find("OUT"); pos != std::string::npos; pos = line.find("OUT")) line.replace(pos, 3, out.string());
    std::array<std::map<std::string, std::string>, 2> runs;
    for (auto& r : runs) {
      fs::remove_all(out);
      fs::create_directories(out);
      const std::string cmd = cli + " " + line + " > " + (work / "stdout.txt").string() + " 2>&1";
      if (std::system(cmd.c_str()) != 0) bad.push_back(name + "(exit)");
      r = snapshot(out);
      r["<stdout>"] = slurp(work / "stdout.txt");
    }
    if (runs[0] != runs[1] || runs[0].size() < 2) bad.push_back(name);
  }
  const auto t0 = Clock::now();
  const std::string suite = std::string(SCREEKIT_TESTS_PATH) + " > " + (work / "suite.txt").string() + " 2>&1";
  const int suite_status = std::system(suite.c_str());
  const double elapsed = seconds_since(t0);
  o.pass = bad.empty() && suite_status == 0 && elapsed < 120.0;
  std::string failures;
  for (const auto& b : bad) failures += " " + b;
  o.detail = fmt::format("{} commands byte-identical on rerun{}, unit suite {} in {:.1f} s",
                         commands.size() - bad.size(), bad.empty() ? "" : " (differ:" + failures + ")",
                         suite_status == 0 ? "passed" : "FAILED", elapsed);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"slippage metric vs ground truth", slippage_suite},
      {"quasi-static force round trip", force_round_trip},
      {"contact classifier recovery", classifier_recovery},
      {"ExGI vegetation cover", exgi_cover},
      {"detection matching and mAP", detection_eval},
      {"serpentine planner", planner},
      {"telemetry energy, inclination, table", telemetry},
      {"determinism and suite runtime", determinism},
  };
  int failed = 0;
  int index = 1;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << fmt::format("{} [{}] {}: {}\n", o.pass ? "PASS" : "FAIL", index++, name, o.detail);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
