#include "screekit/kinematics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "screekit/error.hpp"

namespace screekit {

namespace {

Eigen::Matrix3d rot_x(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()).toRotationMatrix(); }
Eigen::Matrix3d rot_y(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix(); }

double lateral_sign(Leg leg) { return is_left(leg) ? 1.0 : -1.0; }

Eigen::Vector3d vec3(const nlohmann::json& j, const char* key) {
  if (!j.is_array() || j.size() != 3) throw ParseError("", 0, key, "expected 3 values");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::string_view leg_name(Leg leg) {
  switch (leg) {
    case Leg::LF: return "LF";
    case Leg::RF: return "RF";
    case Leg::LH: return "LH";
    case Leg::RH: return "RH";
  }
  return "?";
}

void QuadrupedModel::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(l_thigh)) fail(ErrorKind::usage, "model: l_thigh must be > 0");
  if (!positive(l_shank)) fail(ErrorKind::usage, "model: l_shank must be > 0");
  if (!positive(base_mass)) fail(ErrorKind::usage, "model: base_mass must be > 0");
  if (!std::isfinite(l_hip) || l_hip < 0.0) fail(ErrorKind::usage, "model: l_hip must be >= 0");
  if (!std::isfinite(gravity)) fail(ErrorKind::usage, "model: gravity must be finite");
  if (!base_inertia.allFinite() || (base_inertia.array() <= 0.0).any()) {
    fail(ErrorKind::usage, "model: base_inertia entries must be > 0");
  }
  for (const auto& h : hip_offset) {
    if (!h.allFinite()) fail(ErrorKind::usage, "model: hip offsets must be finite");
  }
}

QuadrupedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open model file");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, "", std::string("invalid model document: ") + e.what());
  }
  QuadrupedModel m;
  try {
    if (doc.contains("hip_offset")) {
      const auto& hips = doc.at("hip_offset");
      if (!hips.is_array() || hips.size() != 4) throw ParseError(path.string(), 0, "hip_offset", "expected 4 legs");
      for (std::size_t i = 0; i < 4; ++i) m.hip_offset[i] = vec3(hips[i], "hip_offset");
    }
    if (doc.contains("l_hip")) m.l_hip = doc.at("l_hip").get<double>();
    if (doc.contains("l_thigh")) m.l_thigh = doc.at("l_thigh").get<double>();
    if (doc.contains("l_shank")) m.l_shank = doc.at("l_shank").get<double>();
    if (doc.contains("base_mass")) m.base_mass = doc.at("base_mass").get<double>();
    if (doc.contains("base_inertia")) m.base_inertia = vec3(doc.at("base_inertia"), "base_inertia");
    if (doc.contains("gravity")) m.gravity = doc.at("gravity").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, "", std::string("bad model field: ") + e.what());
  }
  m.validate();
  return m;
}

void save_model(const std::filesystem::path& path, const QuadrupedModel& model) {
  nlohmann::ordered_json doc;
  auto arr = [](const Eigen::Vector3d& v) { return nlohmann::ordered_json::array({v.x(), v.y(), v.z()}); };
  doc["hip_offset"] = nlohmann::ordered_json::array();
  for (const auto& h : model.hip_offset) doc["hip_offset"].push_back(arr(h));
  doc["l_hip"] = model.l_hip;
  doc["l_thigh"] = model.l_thigh;
  doc["l_shank"] = model.l_shank;
  doc["base_mass"] = model.base_mass;
  doc["base_inertia"] = arr(model.base_inertia);
  doc["gravity"] = model.gravity;
  std::ofstream out(path);
  if (!out) fail(ErrorKind::parse, "cannot write model file: " + path.string());
  out << doc.dump(2) << '\n';
}

LegJoints leg_joints(const JointVector& joints, Leg leg) {
  return joints.segment<3>(3 * leg_index(leg));
}

Eigen::Vector3d foot_position(const QuadrupedModel& model, const LegJoints& q, Leg leg) {
  const Eigen::Vector3d shank(0.0, 0.0, -model.l_shank);
  const Eigen::Vector3d thigh(0.0, 0.0, -model.l_thigh);
  const Eigen::Vector3d lateral(0.0, lateral_sign(leg) * model.l_hip, 0.0);
  const Eigen::Vector3d in_haa = lateral + rot_y(q[1]) * (thigh + rot_y(q[2]) * shank);
  return model.hip_offset[static_cast<std::size_t>(leg_index(leg))] + rot_x(q[0]) * in_haa;
}

Eigen::Matrix3d leg_jacobian(const QuadrupedModel& model, const LegJoints& q, Leg leg) {
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d ey = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d shank(0.0, 0.0, -model.l_shank);
  const Eigen::Vector3d thigh(0.0, 0.0, -model.l_thigh);
  const Eigen::Vector3d lateral(0.0, lateral_sign(leg) * model.l_hip, 0.0);

  const Eigen::Matrix3d r_haa = rot_x(q[0]);
  const Eigen::Matrix3d r_hfe = rot_y(q[1]);
  const Eigen::Vector3d knee_to_foot = rot_y(q[2]) * shank;
  const Eigen::Vector3d hfe_to_foot = thigh + knee_to_foot;
  const Eigen::Vector3d in_haa = lateral + r_hfe * hfe_to_foot;

  Eigen::Matrix3d j;
  j.col(0) = ex.cross(r_haa * in_haa);
  j.col(1) = r_haa * ey.cross(r_hfe * hfe_to_foot);
  j.col(2) = r_haa * r_hfe * ey.cross(knee_to_foot);
  return j;
}

std::optional<LegJoints> leg_inverse_kinematics(const QuadrupedModel& model, const Eigen::Vector3d& foot_base,
                                                Leg leg) {
  const Eigen::Vector3d u = foot_base - model.hip_offset[static_cast<std::size_t>(leg_index(leg))];
  const double lateral = lateral_sign(leg) * model.l_hip;

  // HAA: the y-z projection of the foot has fixed lateral component `lateral`.
  const double d2 = u.y() * u.y() + u.z() * u.z();
  const double planar2 = d2 - model.l_hip * model.l_hip;
  if (planar2 < 0.0) return std::nullopt;
  const double planar_z = -std::sqrt(planar2);
  const double haa = std::atan2(u.z(), u.y()) - std::atan2(planar_z, lateral);

  // HFE/KFE: planar two-link problem in the x-z plane after HAA.
  const double reach2 = u.x() * u.x() + planar_z * planar_z;
  const double lt = model.l_thigh;
  const double ls = model.l_shank;
  const double cos_knee = (reach2 - lt * lt - ls * ls) / (2.0 * lt * ls);
  if (cos_knee < -1.0 || cos_knee > 1.0) return std::nullopt;
  const double kfe = -std::acos(cos_knee);
  const double a = lt + ls * std::cos(kfe);
  const double b = ls * std::sin(kfe);
  const double hfe = std::atan2(-u.x(), -planar_z) - std::atan2(b, a);

  return LegJoints(std::remainder(haa, 2.0 * std::numbers::pi), hfe, kfe);
}

double condition_number(const Eigen::Matrix3d& m) {
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(m);
  const auto& sv = svd.singularValues();
  if (!(sv[2] > 0.0)) return std::numeric_limits<double>::infinity();
  return sv[0] / sv[2];
}

FootState foot_kinematics(const QuadrupedModel& model, const TelemetrySample& sample, Leg leg) {
  const LegJoints q = leg_joints(sample.joint_pos, leg);
  const LegJoints qd = leg_joints(sample.joint_vel, leg);
  const Eigen::Matrix3d rot = sample.base_orientation.normalized().toRotationMatrix();

  FootState fs;
  fs.position_base = foot_position(model, q, leg);
  fs.leg_jacobian = leg_jacobian(model, q, leg);
  const Eigen::Vector3d offset_world = rot * fs.position_base;
  fs.position = sample.base_position + offset_world;
  fs.velocity = sample.base_lin_vel + sample.base_ang_vel.cross(offset_world) + rot * (fs.leg_jacobian * qd);
  return fs;
}

}  // namespace screekit
