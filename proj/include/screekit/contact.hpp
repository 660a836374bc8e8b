#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "screekit/kinematics.hpp"
#include "screekit/telemetry.hpp"

namespace screekit {

/// P(contact | f) = 1 / (1 + exp(-beta1 * f - beta0)), f in newtons.
struct ContactClassifier {
  double beta0 = -3.0;
  double beta1 = 0.06;

  void validate() const;
};

double contact_probability(const ContactClassifier& c, double f_vertical);

ContactClassifier load_classifier(const std::filesystem::path& path);
void save_classifier(const std::filesystem::path& path, const ContactClassifier& c);

enum class ForceMethod { quasi_static, full_id };

inline constexpr double kSingularConditionLimit = 1e6;

struct FootForce {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();  // world, ground reaction on the foot
  double f_vertical = 0.0;
  bool valid = true;
  std::string diagnostic;
};

struct ContactForceEstimate {
  std::array<FootForce, 4> feet;
};

/// quasi_static: per leg f = -(J^T)^-1 tau, rotated to world.
/// full_id: least-squares solve of J_c^T f = M nu_dot + h - S^T tau over the
/// rigid-base / massless-leg model. A leg whose Jacobian condition number
/// exceeds kSingularConditionLimit is flagged invalid and excluded.
ContactForceEstimate estimate_contact_forces(const QuadrupedModel& model, const TelemetrySample& sample,
                                             ForceMethod method = ForceMethod::quasi_static,
                                             const BaseAcceleration& base_acc = {});

/// tau_leg = -J_leg^T R^T f_world, the statics map inverted by the quasi-static estimator.
LegJoints torques_from_force(const QuadrupedModel& model, const TelemetrySample& sample, Leg leg,
                             const Eigen::Vector3d& force_world);

struct LabeledForceSample {
  double f_vertical = 0.0;
  int label = 0;
};

struct FitOptions {
  double l2 = 0.0;  // penalty on beta1 only; the intercept is never penalized
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;
};

/// Newton-Raphson maximum likelihood fit of the contact sigmoid. The stopping
/// test uses the inf-norm of the gradient of the mean log-likelihood.
ContactClassifier fit_classifier(std::span<const LabeledForceSample> data, const FitOptions& options = {});

std::vector<LabeledForceSample> parse_training_data(std::istream& in, const std::string& source = "<stream>");
std::vector<LabeledForceSample> load_training_data(const std::filesystem::path& path);
void write_training_data(std::ostream& out, std::span<const LabeledForceSample> data);

struct FootContactSeries {
  std::vector<double> probability;
  std::vector<int> state;
};

struct ContactTimeline {
  std::vector<double> t;
  std::array<FootContactSeries, 4> feet;
  double threshold = 0.5;
  double hysteresis = 0.1;
};

inline constexpr double kDefaultContactThreshold = 0.5;
inline constexpr double kDefaultContactHysteresis = 0.1;

/// Schmitt trigger: switch on at p >= threshold + h/2, off at p <= threshold - h/2.
/// The first sample is compared to the plain threshold.
std::vector<int> schmitt_trigger(std::span<const double> probability, double threshold, double hysteresis);

ContactTimeline binarize(std::span<const double> t, const std::array<std::vector<double>, 4>& probabilities,
                         double threshold = kDefaultContactThreshold,
                         double hysteresis = kDefaultContactHysteresis);

struct ContactOptions {
  ForceMethod method = ForceMethod::quasi_static;
  double threshold = kDefaultContactThreshold;
  double hysteresis = kDefaultContactHysteresis;
  int smoothing_window = kDefaultSmoothingWindow;
};

/// Full chain for a log: force estimate, sigmoid, hysteresis. Feet with an
/// invalid force estimate get probability 0 at that sample.
ContactTimeline contact_timeline(const TelemetryLog& log, const QuadrupedModel& model,
                                 const ContactClassifier& classifier, const ContactOptions& options = {});

}  // namespace screekit
