#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "screekit/commands.hpp"
#include "screekit/contact.hpp"
#include "screekit/synth.hpp"
#include "test_util.hpp"

using namespace screekit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

int binary(const std::string& args) {
  const std::string cmd = std::string(SCREEKIT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json load(const fs::path& p) { return nlohmann::json::parse(test_util::slurp(p)); }

// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = test_util::slurp(e.path());
  }
  return files;
}

// A synthetic mission shared by the tests below.
const fs::path& mission() {
  static const fs::path dir = [] {
    const fs::path d = test_util::scratch("cli_mission");
    const Run r = cli({"synth", "--preset", "mission", "--seed", "3", "--slips", "2", "--out-dir", d.string()});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

struct EnvGuard {
  explicit EnvGuard(const std::string& value) { setenv(kConfigDirVariable, value.c_str(), 1); }
  ~EnvGuard() { unsetenv(kConfigDirVariable); }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help and usage errors") {
    const Run help = cli({"--help"});
    CHECK(help.code == 0);
    for (const char* sub : {"slip", "vegcover", "plan", "eval-det", "summary", "synth", "report", "fit-classifier"}) {
      CHECK(help.out.find(sub) != std::string::npos);
    }
    CHECK(cli({}).code == 1);
    CHECK(cli({"bogus"}).code == 1);
    CHECK(cli({"slip", "--log", "x.jsonl"}).code == 1);  // missing --out
    CHECK(cli({"plan", "--width", "4", "--height", "4", "--spacing", "5", "--out", "x"}).code == 1);
  }

  TEST_CASE("exit codes from the installed binary") {
    const fs::path dir = test_util::scratch("cli_codes");
    CHECK(binary("--help") == 0);
    CHECK(binary("nonsense") == 1);
    CHECK(binary("plan --width 4 --height 4 --spacing 9 --out " + (dir / "p").string()) == 1);
    CHECK(binary("slip --log " + (dir / "missing.jsonl").string() + " --out " + (dir / "s.json").string()) == 2);
    test_util::spit(dir / "bad.jsonl", "{\"t\": 0.0}\nnot json\n");
    CHECK(binary("summary --log " + (dir / "bad.jsonl").string() + " --out " + (dir / "sum").string()) == 2);

    // A perfectly still robot has no base travel.
    test_util::spit(dir / "still.json", scenario_to_json(standing_scenario(1.0, 1, 0.0)).dump());
    CHECK(binary("synth --scenario " + (dir / "still.json").string() + " --out-dir " + (dir / "still").string()) == 0);
    CHECK(binary("slip --log " + (dir / "still" / "telemetry.jsonl").string() + " --out " + (dir / "s.json").string()) ==
          3);
    CHECK(binary("plan --width 4 --height 4 --out " + (dir / "ok").string()) == 0);
  }

  TEST_CASE("parse errors name the file and line") {
    const fs::path dir = test_util::scratch("cli_parse");
    test_util::spit(dir / "bad.jsonl", "# header\n{\"t\": 0.0, \"bogus\": 1}\n");
    const Run r = cli({"summary", "--log", (dir / "bad.jsonl").string(), "--out", (dir / "o").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("bad.jsonl") != std::string::npos);
    CHECK(r.err.find(":2") != std::string::npos);
  }

  TEST_CASE("slip report matches the sidecar") {
    const fs::path dir = test_util::scratch("cli_slip");
    const Run r = cli({"slip", "--log", (mission() / "telemetry.jsonl").string(), "--out", (dir / "slip.json").string()});
    REQUIRE(r.code == 0);
    const auto doc = load(dir / "slip.json");
    const auto side = load(mission() / "sidecar.json");
    CHECK(doc["slippage"]["s"].get<double>() == doctest::Approx(side["s"].get<double>()).epsilon(0.02));
    CHECK(doc["defaults"]["exgi_threshold"] == 20);
    CHECK(doc["defaults"]["grid_spacing_m"] == 1.0);
    CHECK(doc["defaults"]["dwell_s"] == 3.0);
    CHECK(doc["defaults"]["travel_speed_mps"] == 0.8);
    CHECK(doc["defaults"]["contact_threshold"] == 0.5);
    CHECK(doc["defaults"]["contact_hysteresis"] == 0.1);
  }

  TEST_CASE("every command is byte-identical on rerun") {
    const fs::path a = test_util::scratch("cli_det_a");
    const fs::path b = test_util::scratch("cli_det_b");
    const std::string log = (mission() / "telemetry.jsonl").string();
    for (const fs::path& d : {a, b}) {
      REQUIRE(cli({"synth", "--preset", "mission", "--seed", "5", "--slips", "1", "--out-dir", (d / "synth").string()}).code == 0);
      REQUIRE(cli({"slip", "--log", log, "--out", (d / "slip.json").string()}).code == 0);
      REQUIRE(cli({"vegcover", "--images", (mission() / "images").string(), "--out", (d / "cover").string()}).code == 0);
      REQUIRE(cli({"vegcover", "--images", (mission() / "images").string(), "--calibrate", "--masks",
                   (mission() / "masks").string(), "--out", (d / "calib").string()})
                  .code == 0);
      REQUIRE(cli({"plan", "--width", "7", "--height", "2", "--name", "NI 2", "--out", (d / "plan").string()}).code == 0);
      REQUIRE(cli({"eval-det", "--gt-dir", (mission() / "gt").string(), "--pred-dir", (mission() / "pred").string(),
                   "--out", (d / "eval.json").string()})
                  .code == 0);
      REQUIRE(cli({"summary", "--log", log, "--out", (d / "summary").string()}).code == 0);
      REQUIRE(cli({"report", "--mission-dir", mission().string(), "--out", (d / "report.json").string()}).code == 0);
    }
    const auto ta = tree(a);
    const auto tb = tree(b);
    CHECK(ta.size() > 20);
    REQUIRE(ta.size() == tb.size());
    for (const auto& [name, content] : ta) {
      INFO(name);
      REQUIRE(tb.count(name) == 1);
      CHECK(tb.at(name) == content);
    }
  }

  TEST_CASE("report agrees with the individual commands") {
    const fs::path dir = test_util::scratch("cli_report");
    const std::string log = (mission() / "telemetry.jsonl").string();
    REQUIRE(cli({"report", "--mission-dir", mission().string(), "--out", (dir / "report.json").string()}).code == 0);
    REQUIRE(cli({"slip", "--log", log, "--out", (dir / "slip.json").string()}).code == 0);
    REQUIRE(cli({"summary", "--log", log, "--out", (dir / "summary").string()}).code == 0);
    REQUIRE(cli({"vegcover", "--images", (mission() / "images").string(), "--masks", (mission() / "masks").string(),
                 "--out", (dir / "cover").string()})
                .code == 0);
    REQUIRE(cli({"eval-det", "--gt-dir", (mission() / "gt").string(), "--pred-dir", (mission() / "pred").string(),
                 "--out", (dir / "eval.json").string()})
                .code == 0);
    const auto rep = load(dir / "report.json");
    CHECK(rep["slippage"] == load(dir / "slip.json")["slippage"]);
    const auto sum = load(dir / "summary" / "summary.json");
    CHECK(rep["attitude"] == sum["attitude"]);
    CHECK(rep["power"] == sum["power"]);
    const auto cover = load(dir / "cover" / "cover.json");
    CHECK(rep["cover"]["images"] == cover["images"]);
    CHECK(rep["cover"]["mean_abs_error_points"] == cover["mean_abs_error_points"]);
    const auto eval = load(dir / "eval.json");
    CHECK(rep["detection"]["all"] == eval["all"]);
    CHECK(rep["defaults"] == eval["defaults"]);
    const auto expected = load(mission() / "expected_counts.json");
    CHECK(eval["all"]["tp"] == expected["total"]["tp"]);
    CHECK(eval["all"]["fp"] == expected["total"]["fp"]);
    CHECK(eval["all"]["fn"] == expected["total"]["fn"]);
  }

  TEST_CASE("report without telemetry is a parse error") {
    const fs::path dir = test_util::scratch("cli_empty_mission");
    CHECK(cli({"report", "--mission-dir", dir.string(), "--out", (dir / "r.json").string()}).code == 2);
  }

  TEST_CASE("configuration directory supplies the classifier") {
    const fs::path dir = test_util::scratch("cli_config");
    save_classifier(dir / "classifier.json", {-4.0, 0.05});
    const std::string log = (mission() / "telemetry.jsonl").string();
    {
      EnvGuard env(dir.string());
      REQUIRE(cli({"slip", "--log", log, "--out", (dir / "env.json").string()}).code == 0);
    }
    REQUIRE(cli({"slip", "--log", log, "--out", (dir / "plain.json").string()}).code == 0);
    const auto env = load(dir / "env.json");
    CHECK(env["settings"]["classifier"]["beta0"] == -4.0);
    CHECK(load(dir / "plain.json")["settings"]["classifier"]["beta0"] == -3.0);
    // An explicit flag beats the environment.
    save_classifier(dir / "flag.json", {-2.0, 0.07});
    EnvGuard env2(dir.string());
    REQUIRE(cli({"slip", "--log", log, "--classifier", (dir / "flag.json").string(), "--out",
                 (dir / "flag_out.json").string()})
                .code == 0);
    CHECK(load(dir / "flag_out.json")["settings"]["classifier"]["beta0"] == -2.0);
  }

  TEST_CASE("empty prediction directory flags undefined precision") {
    const fs::path dir = test_util::scratch("cli_empty_pred");
    fs::create_directories(dir / "pred");
    const Run r = cli({"eval-det", "--gt-dir", (mission() / "gt").string(), "--pred-dir", (dir / "pred").string(),
                       "--out", (dir / "table.txt").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("* undefined") != std::string::npos);
    CHECK(test_util::slurp(dir / "table.txt") == r.out);
  }

  TEST_CASE("plan outputs and warnings") {
    const fs::path dir = test_util::scratch("cli_plan");
    const Run r = cli({"plan", "--width", "7", "--height", "2", "--name", "NI 2", "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.err.find("warning") != std::string::npos);
    const auto plan = load(dir / "plan.json");
    CHECK(plan["waypoints"].size() == 14);
    CHECK(plan["grid_length"] == 13.0);
    CHECK(test_util::slurp(dir / "plan.svg").rfind("<svg", 0) == 0);
    const Run inside = cli({"plan", "--width", "4", "--height", "4", "--start", "1,1", "--out", dir.string()});
    CHECK(inside.code == 1);
    CHECK(inside.err.find("inside") != std::string::npos);
  }

  TEST_CASE("fit-classifier writes a usable document") {
    const fs::path dir = test_util::scratch("cli_fit");
    Rng rng(31);
    std::vector<LabeledForceSample> data;
    for (int i = 0; i < 2000; ++i) {
      const double f = rng.uniform(0.0, 150.0);
      data.push_back({f, rng.uniform() < 1.0 / (1.0 + std::exp(3.0 - 0.06 * f)) ? 1 : 0});
    }
    std::ostringstream text;
    write_training_data(text, data);
    test_util::spit(dir / "train.txt", text.str());
    REQUIRE(cli({"fit-classifier", "--data", (dir / "train.txt").string(), "--out", (dir / "c.json").string()}).code == 0);
    const ContactClassifier c = load_classifier(dir / "c.json");
    CHECK(-c.beta0 / c.beta1 == doctest::Approx(50.0).epsilon(0.1));

    test_util::spit(dir / "sep.txt", "1 0\n2 0\n3 0\n4 0\n5 0\n6 1\n7 1\n8 1\n9 1\n10 1\n");
    const Run sep = cli({"fit-classifier", "--data", (dir / "sep.txt").string(), "--out", (dir / "s.json").string()});
    CHECK(sep.code == 3);
    CHECK(sep.err.find("--l2") != std::string::npos);
    CHECK(cli({"fit-classifier", "--data", (dir / "sep.txt").string(), "--l2", "0.01", "--out",
               (dir / "s.json").string()})
              .code == 0);
  }

  TEST_CASE("vegcover writes masks and overlays") {
    const fs::path dir = test_util::scratch("cli_cover");
    REQUIRE(cli({"vegcover", "--images", (mission() / "images").string(), "--out", (dir / "plain").string()}).code == 0);
    CHECK(fs::exists(dir / "plain" / "masks"));
    REQUIRE(cli({"vegcover", "--images", (mission() / "images").string(), "--masks", (mission() / "masks").string(),
                 "--out", (dir / "cmp").string()})
                .code == 0);
    CHECK(fs::exists(dir / "cmp" / "overlays"));
    CHECK(cli({"vegcover", "--images", (mission() / "images").string(), "--calibrate", "--out", (dir / "x").string()})
              .code == 1);
  }
}
