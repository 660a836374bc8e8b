#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string_view>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "screekit/telemetry.hpp"

namespace screekit {

enum class Leg : int { LF = 0, RF = 1, LH = 2, RH = 3 };

inline constexpr std::array<Leg, 4> kAllLegs = {Leg::LF, Leg::RF, Leg::LH, Leg::RH};

std::string_view leg_name(Leg leg);
inline int leg_index(Leg leg) { return static_cast<int>(leg); }
inline bool is_left(Leg leg) { return leg == Leg::LF || leg == Leg::LH; }

/// Generic three-joint quadruped leg chain:
///   foot = hip + Rx(haa) * ( [0, ±l_hip, 0] + Ry(hfe) * ( [0, 0, -l_thigh] + Ry(kfe) * [0, 0, -l_shank] ) )
/// with +l_hip on the left legs. All vectors in the base frame.
struct QuadrupedModel {
  std::array<Eigen::Vector3d, 4> hip_offset = {
      Eigen::Vector3d(0.3, 0.1, 0.0), Eigen::Vector3d(0.3, -0.1, 0.0),
      Eigen::Vector3d(-0.3, 0.1, 0.0), Eigen::Vector3d(-0.3, -0.1, 0.0)};
  double l_hip = 0.1;
  double l_thigh = 0.3;
  double l_shank = 0.3;
  double base_mass = 50.0;
  // Principal moments of the lumped rigid base (kg m^2), used only by the
  // full inverse-dynamics force estimate.
  Eigen::Vector3d base_inertia = Eigen::Vector3d(0.9, 2.0, 2.2);
  double gravity = 9.81;

  /// Throws Error(usage) when an invariant is violated.
  void validate() const;
};

QuadrupedModel load_model(const std::filesystem::path& path);
void save_model(const std::filesystem::path& path, const QuadrupedModel& model);

using LegJoints = Eigen::Vector3d;

LegJoints leg_joints(const JointVector& joints, Leg leg);

/// Foot position in the base frame.
Eigen::Vector3d foot_position(const QuadrupedModel& model, const LegJoints& q, Leg leg);

/// d foot_position / d q, base frame.
Eigen::Matrix3d leg_jacobian(const QuadrupedModel& model, const LegJoints& q, Leg leg);

/// Analytic inverse of foot_position on the knee branch with kfe < 0 and the
/// foot below the hip in the abduction plane.
/// Returns nullopt when the target is outside the leg workspace.
std::optional<LegJoints> leg_inverse_kinematics(const QuadrupedModel& model, const Eigen::Vector3d& foot_base,
                                                Leg leg);

/// Ratio of largest to smallest singular value; infinity when rank deficient.
double condition_number(const Eigen::Matrix3d& m);

struct FootState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // world
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // world
  Eigen::Vector3d position_base = Eigen::Vector3d::Zero();
  Eigen::Matrix3d leg_jacobian = Eigen::Matrix3d::Zero();  // base frame
};

/// v_foot = v_b + w_b x (R r) + R J qdot_leg.
FootState foot_kinematics(const QuadrupedModel& model, const TelemetrySample& sample, Leg leg);

}  // namespace screekit
