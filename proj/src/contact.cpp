#include "screekit/contact.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "screekit/error.hpp"

namespace screekit {

namespace {

constexpr double kDivergenceNorm = 1e6;

double log1p_exp(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

struct Objective {
  double value = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
};

// Mean Bernoulli log-likelihood minus 0.5 * l2 * beta1^2, with derivatives.
Objective evaluate(std::span<const LabeledForceSample> data, const Eigen::Vector2d& beta, double l2) {
  Objective obj;
  for (const auto& s : data) {
    const double z = beta[0] + beta[1] * s.f_vertical;
    const double p = sigmoid(z);
    const double w = p * (1.0 - p);
    const double r = static_cast<double>(s.label) - p;
    obj.value += static_cast<double>(s.label) * z - log1p_exp(z);
    obj.gradient[0] += r;
    obj.gradient[1] += r * s.f_vertical;
    obj.hessian(0, 0) -= w;
    obj.hessian(0, 1) -= w * s.f_vertical;
    obj.hessian(1, 1) -= w * s.f_vertical * s.f_vertical;
  }
  const double n = static_cast<double>(data.size());
  obj.value /= n;
  obj.gradient /= n;
  obj.hessian /= n;
  obj.hessian(1, 0) = obj.hessian(0, 1);
  obj.value -= 0.5 * l2 * beta[1] * beta[1];
  obj.gradient[1] -= l2 * beta[1];
  obj.hessian(1, 1) -= l2;
  return obj;
}

[[noreturn]] void report_separable() {
  fail(ErrorKind::numeric,
       "logistic fit diverges: the labels are perfectly separable by force; set an L2 weight > 0 "
       "(e.g. --l2 1e-4) to obtain a finite classifier");
}

}  // namespace

void ContactClassifier::validate() const {
  if (!std::isfinite(beta0) || !std::isfinite(beta1)) fail(ErrorKind::usage, "classifier: parameters must be finite");
  if (!(beta1 > 0.0)) fail(ErrorKind::usage, "classifier: beta1 must be > 0");
}

double contact_probability(const ContactClassifier& c, double f_vertical) {
  return sigmoid(c.beta1 * f_vertical + c.beta0);
}

ContactClassifier load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open classifier file");
  ContactClassifier c;
  try {
    const auto doc = nlohmann::json::parse(in);
    c.beta0 = doc.at("beta0").get<double>();
    c.beta1 = doc.at("beta1").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, "", std::string("invalid classifier document: ") + e.what());
  }
  c.validate();
  return c;
}

void save_classifier(const std::filesystem::path& path, const ContactClassifier& c) {
  nlohmann::ordered_json doc;
  doc["beta0"] = c.beta0;
  doc["beta1"] = c.beta1;
  std::ofstream out(path);
  if (!out) fail(ErrorKind::parse, "cannot write classifier file: " + path.string());
  out << doc.dump(2) << '\n';
}

LegJoints torques_from_force(const QuadrupedModel& model, const TelemetrySample& sample, Leg leg,
                             const Eigen::Vector3d& force_world) {
  const Eigen::Matrix3d rot = sample.base_orientation.normalized().toRotationMatrix();
  const Eigen::Matrix3d j = leg_jacobian(model, leg_joints(sample.joint_pos, leg), leg);
  return -j.transpose() * (rot.transpose() * force_world);
}

ContactForceEstimate estimate_contact_forces(const QuadrupedModel& model, const TelemetrySample& sample,
                                             ForceMethod method, const BaseAcceleration& base_acc) {
  const Eigen::Matrix3d rot = sample.base_orientation.normalized().toRotationMatrix();
  ContactForceEstimate est;
  std::array<Eigen::Matrix3d, 4> jac;
  std::array<Eigen::Vector3d, 4> foot_world;

  for (Leg leg : kAllLegs) {
    const auto i = static_cast<std::size_t>(leg_index(leg));
    const LegJoints q = leg_joints(sample.joint_pos, leg);
    jac[i] = leg_jacobian(model, q, leg);
    foot_world[i] = rot * foot_position(model, q, leg);
    const double cond = condition_number(jac[i]);
    if (!(cond <= kSingularConditionLimit)) {
      est.feet[i].valid = false;
      est.feet[i].diagnostic = "singular leg Jacobian (condition number " +
                               (std::isfinite(cond) ? std::to_string(cond) : std::string("inf")) + ")";
    }
  }

  if (method == ForceMethod::quasi_static) {
    for (Leg leg : kAllLegs) {
      const auto i = static_cast<std::size_t>(leg_index(leg));
      if (!est.feet[i].valid) continue;
      const LegJoints tau = leg_joints(sample.joint_torque, leg);
      const Eigen::Vector3d f_base = -jac[i].transpose().partialPivLu().solve(tau);
      est.feet[i].force = rot * f_base;
      est.feet[i].f_vertical = est.feet[i].force.z();
    }
    return est;
  }

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < 4; ++i) {
    if (est.feet[i].valid) active.push_back(i);
  }
  if (active.empty()) return est;

  const auto k = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(6 + 3 * k, 3 * k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(6 + 3 * k);

  const Eigen::Matrix3d inertia_world = rot * model.base_inertia.asDiagonal() * rot.transpose();
  const Eigen::Vector3d& omega = sample.base_ang_vel;
  b.segment<3>(0) = model.base_mass * (base_acc.linear + Eigen::Vector3d(0.0, 0.0, model.gravity));
  b.segment<3>(3) = inertia_world * base_acc.angular + omega.cross(inertia_world * omega);

  for (Eigen::Index c = 0; c < k; ++c) {
    const std::size_t i = active[static_cast<std::size_t>(c)];
    a.block<3, 3>(0, 3 * c) = Eigen::Matrix3d::Identity();
    a.block<3, 3>(3, 3 * c) = skew(foot_world[i]);
    a.block<3, 3>(6 + 3 * c, 3 * c) = jac[i].transpose() * rot.transpose();
    b.segment<3>(6 + 3 * c) = -leg_joints(sample.joint_torque, kAllLegs[i]);
  }

  const Eigen::VectorXd f = a.completeOrthogonalDecomposition().solve(b);
  for (Eigen::Index c = 0; c < k; ++c) {
    auto& foot = est.feet[active[static_cast<std::size_t>(c)]];
    foot.force = f.segment<3>(3 * c);
    foot.f_vertical = foot.force.z();
  }
  return est;
}

ContactClassifier fit_classifier(std::span<const LabeledForceSample> data, const FitOptions& options) {
  if (data.size() < 10) fail(ErrorKind::usage, "classifier fit needs at least 10 samples");
  if (!(options.l2 >= 0.0)) fail(ErrorKind::usage, "L2 weight must be >= 0");
  bool has0 = false;
  bool has1 = false;
  double max0 = -INFINITY, min0 = INFINITY, max1 = -INFINITY, min1 = INFINITY;
  for (const auto& s : data) {
    if (!std::isfinite(s.f_vertical)) fail(ErrorKind::usage, "training force must be finite");
    if (s.label == 0) {
      has0 = true;
      max0 = std::max(max0, s.f_vertical);
      min0 = std::min(min0, s.f_vertical);
    } else if (s.label == 1) {
      has1 = true;
      max1 = std::max(max1, s.f_vertical);
      min1 = std::min(min1, s.f_vertical);
    } else {
      fail(ErrorKind::usage, "training label must be 0 or 1");
    }
  }
  if (!has0 || !has1) fail(ErrorKind::usage, "degenerate labels: training data must contain both 0 and 1");
  if (options.l2 == 0.0 && (max0 < min1 || max1 < min0)) report_separable();

  Eigen::Vector2d beta = Eigen::Vector2d::Zero();
  Objective obj = evaluate(data, beta, options.l2);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (obj.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) break;
    const Eigen::LDLT<Eigen::Matrix2d> ldlt(-obj.hessian);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) report_separable();
    const Eigen::Vector2d step = ldlt.solve(obj.gradient);
    if (!step.allFinite()) report_separable();

    // Backtracking keeps the objective monotone; Newton steps are accepted
    // in full near the optimum.
    double scale = 1.0;
    Objective next;
    Eigen::Vector2d candidate;
    for (int h = 0; h < 40; ++h) {
      candidate = beta + scale * step;
      next = evaluate(data, candidate, options.l2);
      if (next.value >= obj.value - 1e-15 * std::abs(obj.value)) break;
      scale *= 0.5;
    }
    const bool stalled = (candidate - beta).lpNorm<Eigen::Infinity>() <=
                         1e-15 * std::max(1.0, beta.lpNorm<Eigen::Infinity>());
    beta = candidate;
    obj = next;
    if (beta.norm() > kDivergenceNorm || !beta.allFinite()) report_separable();
    if (stalled) break;
  }

  ContactClassifier c{beta[0], beta[1]};
  if (!(c.beta1 > 0.0)) {
    fail(ErrorKind::numeric, "fitted beta1 is not positive: contact probability must increase with load");
  }
  return c;
}

std::vector<LabeledForceSample> parse_training_data(std::istream& in, const std::string& source) {
  std::vector<LabeledForceSample> data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (tokens.size() != 2) throw ParseError(source, line_no, "", "expected 'f_vertical label'");
    LabeledForceSample s;
    try {
      std::size_t used = 0;
      s.f_vertical = std::stod(tokens[0], &used);
      if (used != tokens[0].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError(source, line_no, "f_vertical", "not a number: " + tokens[0]);
    }
    if (!std::isfinite(s.f_vertical)) throw ParseError(source, line_no, "f_vertical", "non-finite force");
    if (tokens[1] == "0") {
      s.label = 0;
    } else if (tokens[1] == "1") {
      s.label = 1;
    } else {
      throw ParseError(source, line_no, "label", "label must be 0 or 1");
    }
    data.push_back(s);
  }
  return data;
}

std::vector<LabeledForceSample> load_training_data(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open training file");
  return parse_training_data(in, path.string());
}

void write_training_data(std::ostream& out, std::span<const LabeledForceSample> data) {
  out << "# f_vertical label\n";
  out.precision(17);
  for (const auto& s : data) out << s.f_vertical << ' ' << s.label << '\n';
}

std::vector<int> schmitt_trigger(std::span<const double> probability, double threshold, double hysteresis) {
  std::vector<int> state(probability.size(), 0);
  if (probability.empty()) return state;
  const double on = threshold + 0.5 * hysteresis;
  const double off = threshold - 0.5 * hysteresis;
  int current = probability[0] >= threshold ? 1 : 0;
  for (std::size_t i = 0; i < probability.size(); ++i) {
    if (i > 0) {
      if (current == 0 && probability[i] >= on) current = 1;
      else if (current == 1 && probability[i] <= off) current = 0;
    }
    state[i] = current;
  }
  return state;
}

ContactTimeline binarize(std::span<const double> t, const std::array<std::vector<double>, 4>& probabilities,
                         double threshold, double hysteresis) {
  if (!(hysteresis >= 0.0)) fail(ErrorKind::usage, "hysteresis must be >= 0");
  ContactTimeline tl;
  tl.t.assign(t.begin(), t.end());
  tl.threshold = threshold;
  tl.hysteresis = hysteresis;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& p = probabilities[i];
    if (p.size() != t.size()) fail(ErrorKind::usage, "probability series length differs from timestamps");
    for (double v : p) {
      if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::usage, "probabilities must lie in [0, 1]");
    }
    tl.feet[i].probability = p;
    tl.feet[i].state = schmitt_trigger(p, threshold, hysteresis);
  }
  return tl;
}

ContactTimeline contact_timeline(const TelemetryLog& log, const QuadrupedModel& model,
                                 const ContactClassifier& classifier, const ContactOptions& options) {
  classifier.validate();
  std::vector<double> t;
  t.reserve(log.samples.size());
  std::array<std::vector<double>, 4> prob;
  for (auto& p : prob) p.reserve(log.samples.size());

  std::vector<BaseAcceleration> acc;
  if (options.method == ForceMethod::full_id) acc = base_accelerations(log, options.smoothing_window);

  for (std::size_t k = 0; k < log.samples.size(); ++k) {
    const auto& s = log.samples[k];
    t.push_back(s.t);
    const ContactForceEstimate est =
        estimate_contact_forces(model, s, options.method, acc.empty() ? BaseAcceleration{} : acc[k]);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& foot = est.feet[i];
      prob[i].push_back(foot.valid ? contact_probability(classifier, foot.f_vertical) : 0.0);
    }
  }
  return binarize(t, prob, options.threshold, options.hysteresis);
}

}  // namespace screekit
