#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace screekit {

inline constexpr std::size_t kNumLegs = 4;
inline constexpr std::size_t kJointsPerLeg = 3;
inline constexpr std::size_t kNumJoints = kNumLegs * kJointsPerLeg;

using JointVector = Eigen::Matrix<double, 12, 1>;

/// One time-stamped robot state. Leg order LF, RF, LH, RH; per leg HAA, HFE, KFE.
/// Linear and angular base velocities are expressed in the world frame and the
/// orientation maps base vectors into the world.
struct TelemetrySample {
  double t = 0.0;
  Eigen::Vector3d base_position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond base_orientation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d base_lin_vel = Eigen::Vector3d::Zero();
  Eigen::Vector3d base_ang_vel = Eigen::Vector3d::Zero();
  JointVector joint_pos = JointVector::Zero();
  JointVector joint_vel = JointVector::Zero();
  JointVector joint_torque = JointVector::Zero();
  std::optional<double> battery_voltage;
  std::optional<double> battery_current;
};

struct LogMetadata {
  std::string mission;
  std::string plot;
  double rate_hz = 0.0;
};

struct TelemetryLog {
  LogMetadata metadata;
  std::vector<TelemetrySample> samples;
};

/// Checks the sample invariants (unit quaternion, finite values, t >= 0).
/// Throws ParseError naming the offending field.
void validate_sample(const TelemetrySample& sample, const std::string& source = {}, std::size_t line = 0);

/// Checks every sample plus strictly increasing timestamps.
void validate_log(const TelemetryLog& log);

TelemetryLog parse_log(std::istream& in, const std::string& source_name = "<stream>");
TelemetryLog parse_log(const std::filesystem::path& path);

void write_log(std::ostream& out, const TelemetryLog& log);
void write_log(const std::filesystem::path& path, const TelemetryLog& log);

struct BaseAttitude {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  double total_inclination = 0.0;
  bool gimbal_locked = false;  // yaw forced to 0, heading folded into roll
};

/// Intrinsic Z-Y-X Euler angles of the base orientation plus the tilt of the
/// base z-axis from world vertical.
BaseAttitude attitude_of(const TelemetrySample& sample);
BaseAttitude attitude_of(const Eigen::Quaterniond& orientation);

/// Inverse of the Z-Y-X decomposition: R = Rz(yaw) * Ry(pitch) * Rx(roll).
Eigen::Quaterniond quaternion_from_rpy(double roll, double pitch, double yaw);

/// arccos(cos(roll) * cos(pitch)).
double total_inclination(double roll, double pitch);

struct AttitudeExtremes {
  double max_abs_roll = 0.0;
  double max_abs_pitch = 0.0;
  double max_total_inclination = 0.0;
  double mean_total_inclination = 0.0;
};

AttitudeExtremes attitude_extremes(const TelemetryLog& log);

inline constexpr double kDefaultPackCapacityWh = 932.0;

struct PowerSummary {
  double duration = 0.0;     // s
  double energy = 0.0;       // Wh
  double mean_power = 0.0;   // W
  std::optional<double> battery_percent_used;
};

/// Trapezoidal integral of voltage * current. Throws when a battery channel is
/// missing on any sample; pass no capacity to omit the percent field.
PowerSummary power_summary(const TelemetryLog& log,
                           std::optional<double> pack_capacity_wh = kDefaultPackCapacityWh);

/// Instantaneous electrical power per sample (W).
std::vector<double> power_series(const TelemetryLog& log);

/// Trapezoidal integral of `values` sampled at `times`.
double trapezoid(std::span<const double> times, std::span<const double> values);

/// Trapezoidal integral restricted to [t0, t1], with the integrand linearly
/// interpolated at window edges that fall between samples.
double trapezoid_window(std::span<const double> times, std::span<const double> values, double t0, double t1);

struct BaseAcceleration {
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();
};

inline constexpr int kDefaultSmoothingWindow = 5;

/// Base accelerations by local quadratic least-squares fits of the logged
/// velocities over `window` samples (odd, >= 3). The window is shifted, not
/// shrunk, at the ends of the log. Works on non-uniform timestamps.
std::vector<BaseAcceleration> base_accelerations(const TelemetryLog& log, int window = kDefaultSmoothingWindow);

}  // namespace screekit
