#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "screekit/detecteval.hpp"
#include "screekit/image.hpp"
#include "screekit/kinematics.hpp"
#include "screekit/telemetry.hpp"

namespace screekit {

/// splitmix64-seeded xoshiro256** generator. Output depends only on the seed,
/// independent of the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  int uniform_int(int lo, int hi);       // [lo, hi]

 private:
  std::array<std::uint64_t, 4> s_{};
};

// ---------------------------------------------------------------------------
// Gait scenarios

struct BaseKeyframe {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
};

struct BaseState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  double yaw = 0.0;
  double yaw_rate = 0.0;
};

/// Cubic Hermite spline through keyframes (position and yaw), with constant
/// roll and pitch. Angular velocity is yaw_rate about world z.
struct BaseTrajectory {
  std::vector<BaseKeyframe> keys;
  double roll = 0.0;
  double pitch = 0.0;

  [[nodiscard]] BaseState at(double t) const;
  [[nodiscard]] Eigen::Quaterniond orientation(double yaw) const;
};

struct Interval {
  double t0 = 0.0;
  double t1 = 0.0;
  [[nodiscard]] bool contains(double t) const { return t >= t0 && t < t1; }
};

/// Horizontal slide of a stance foot. Velocity follows
/// distance / T * (1 - cos(2 pi (t - t0) / T)) along `direction`.
struct SlipEpisode {
  Leg leg = Leg::LF;
  Interval interval;
  Eigen::Vector2d direction = Eigen::Vector2d::UnitX();  // world xy, normalized on use
  double distance = 0.0;                                 // m
};

struct BatteryProfile {
  double voltage = 52.0;                                     // V, constant
  std::vector<std::pair<double, double>> current = {{0.0, 5.0}};  // (t, A) keyframes, piecewise linear
  [[nodiscard]] double current_at(double t) const;
};

struct GaitScenario {
  std::string name = "scenario";
  std::string mission = "synthetic";
  std::string plot = "synthetic";
  double duration = 5.0;  // s
  double rate_hz = 100.0;
  BaseTrajectory base;
  std::array<std::vector<Interval>, 4> stance;  // per foot; swing elsewhere
  std::vector<SlipEpisode> slips;
  double stand_height = 0.45;  // nominal hip-to-foot drop along base z
  double step_height = 0.08;
  double torque_noise = 0.0;    // N m, uniform half-width
  double velocity_noise = 0.0;  // rad/s, uniform half-width
  std::optional<BatteryProfile> battery = BatteryProfile{};
  std::uint64_t seed = 0;

  /// Throws Error(usage) on inconsistent timing (slips outside stance, etc.).
  void validate() const;
};

struct GroundTruthSidecar {
  std::vector<double> t;                          // log timestamps
  std::array<std::vector<int>, 4> contact;        // true c_i at the log timestamps
  std::array<std::vector<double>, 4> f_vertical;  // true vertical load at the log timestamps
  std::array<double, 4> per_foot_slip_distance{};
  double base_distance = 0.0;
  std::optional<double> s;  // absent when the base does not move
  int fine_factor = 100;
};

struct SynthTelemetry {
  TelemetryLog log;
  GroundTruthSidecar sidecar;
};

SynthTelemetry synth_telemetry(const GaitScenario& scenario, const QuadrupedModel& model = {});

/// Contact intervals for a periodic gait. `phase` holds per-foot offsets in
/// [0, 1); a foot is in stance for the first `duty` of its cycle.
std::array<std::vector<Interval>, 4> periodic_schedule(double duration, double period, double duty,
                                                       const std::array<double, 4>& phase);
std::array<std::vector<Interval>, 4> full_stance(double duration);

/// Builders for the stock scenarios.
GaitScenario standing_scenario(double duration, std::uint64_t seed, double sway = 0.05);
GaitScenario straight_walk_scenario(double duration, double speed, std::uint64_t seed);
GaitScenario turning_walk_scenario(double duration, double speed, double yaw_rate, std::uint64_t seed);

/// Adds `count` slip episodes inside randomly chosen stance intervals.
void add_random_slips(GaitScenario& scenario, int count, Rng& rng);

/// The seeded 20-scenario suite: standing / straight / turning walks with
/// 0-3 slip episodes each.
std::vector<GaitScenario> standard_scenario_suite();

nlohmann::ordered_json scenario_to_json(const GaitScenario& scenario);
GaitScenario scenario_from_json(const nlohmann::json& doc);
nlohmann::ordered_json sidecar_to_json(const GroundTruthSidecar& sidecar);
GroundTruthSidecar sidecar_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Images

enum class ImagePattern { half, dithered, background, scene };
enum class SceneContrast { high, low };

struct ImageSpec {
  std::string name = "image";
  ImagePattern pattern = ImagePattern::half;
  int width = 64;
  int height = 64;
  double fraction = 0.5;
  SceneContrast contrast = SceneContrast::high;
  std::uint64_t seed = 0;
};

struct SynthImage {
  RgbImage image;
  GrayImage mask;
  std::size_t vegetation_pixels = 0;
};

SynthImage synth_image(const ImageSpec& spec);

/// Seeded benchmark image specs (field-like scenes with masks).
std::vector<ImageSpec> cover_benchmark(SceneContrast contrast, int count = 8);

nlohmann::ordered_json image_spec_to_json(const ImageSpec& spec);
ImageSpec image_spec_from_json(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Detection scenes

struct DetectionSceneSpec {
  int images = 1;
  int gt_per_image = 6;        // at most 16 (one per 4x4 cell)
  double jitter = 0.0;         // relative centre/size perturbation of matched predictions
  int missed_per_image = 0;    // ground truths with no prediction (planted FN)
  int planted_fp_per_image = 0;  // predictions in empty cells (planted FP)
  int duplicates_per_image = 0;  // extra predictions on an already-predicted box
  int random_fp_per_image = 0;   // predictions anywhere
  int num_classes = 6;
};

struct SynthDetections {
  AnnotationSet gt;
  AnnotationSet pred;
  std::map<int, DetectionCounts> expected_per_class;  // IoU 0.5
  DetectionCounts expected;                           // IoU 0.5
};

SynthDetections synth_detections(const DetectionSceneSpec& spec, std::uint64_t seed);

/// Seeded random spec with at most 20 boxes per image.
DetectionSceneSpec random_scene_spec(std::uint64_t seed);

/// Maximum-cardinality one-to-one same-class assignment at `iou_threshold`,
/// by exhaustive search. Independent of the greedy evaluator.
std::map<int, DetectionCounts> exhaustive_match_counts(const AnnotationSet& gt, const AnnotationSet& pred,
                                                       double iou_threshold);

nlohmann::ordered_json detection_spec_to_json(const DetectionSceneSpec& spec);
DetectionSceneSpec detection_spec_from_json(const nlohmann::json& doc);

}  // namespace screekit
