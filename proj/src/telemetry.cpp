#include "screekit/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "screekit/error.hpp"

namespace screekit {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kQuatNormTol = 1e-6;
constexpr double kGimbalTol = 1e-9;

bool all_finite(const auto& m) { return m.allFinite(); }

template <int N>
Eigen::Matrix<double, N, 1> read_vector(const json& record, const char* key, const std::string& source,
                                        std::size_t line) {
  auto it = record.find(key);
  if (it == record.end()) throw ParseError(source, line, key, "missing field");
  if (!it->is_array()) throw ParseError(source, line, key, "expected an array");
  if (it->size() != static_cast<std::size_t>(N)) {
    throw ParseError(source, line, key,
                     "expected " + std::to_string(N) + " values, got " + std::to_string(it->size()));
  }
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) {
    const auto& v = (*it)[static_cast<std::size_t>(i)];
    if (!v.is_number()) throw ParseError(source, line, key, "non-numeric entry " + std::to_string(i));
    out[i] = v.get<double>();
  }
  return out;
}

double read_scalar(const json& record, const char* key, const std::string& source, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end()) throw ParseError(source, line, key, "missing field");
  if (!it->is_number()) throw ParseError(source, line, key, "expected a number");
  return it->get<double>();
}

std::optional<double> read_optional(const json& record, const char* key, const std::string& source,
                                    std::size_t line) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ParseError(source, line, key, "expected a number");
  return it->get<double>();
}

TelemetrySample sample_from_json(const json& record, const std::string& source, std::size_t line) {
  static constexpr std::array kKnown = {"t", "p", "q", "v", "w", "jq", "jv", "tau", "bv", "bi"};
  for (const auto& [key, _] : record.items()) {
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
      throw ParseError(source, line, key, "unknown field");
    }
  }
  TelemetrySample s;
  s.t = read_scalar(record, "t", source, line);
  s.base_position = read_vector<3>(record, "p", source, line);
  const Eigen::Vector4d q = read_vector<4>(record, "q", source, line);
  s.base_orientation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
  s.base_lin_vel = read_vector<3>(record, "v", source, line);
  s.base_ang_vel = read_vector<3>(record, "w", source, line);
  s.joint_pos = read_vector<12>(record, "jq", source, line);
  s.joint_vel = read_vector<12>(record, "jv", source, line);
  s.joint_torque = read_vector<12>(record, "tau", source, line);
  s.battery_voltage = read_optional(record, "bv", source, line);
  s.battery_current = read_optional(record, "bi", source, line);
  validate_sample(s, source, line);
  return s;
}

template <typename Vec>
ordered_json to_array(const Vec& v) {
  ordered_json arr = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

ordered_json sample_to_json(const TelemetrySample& s) {
  ordered_json rec;
  rec["t"] = s.t;
  rec["p"] = to_array(s.base_position);
  const auto& q = s.base_orientation;
  rec["q"] = ordered_json::array({q.w(), q.x(), q.y(), q.z()});
  rec["v"] = to_array(s.base_lin_vel);
  rec["w"] = to_array(s.base_ang_vel);
  rec["jq"] = to_array(s.joint_pos);
  rec["jv"] = to_array(s.joint_vel);
  rec["tau"] = to_array(s.joint_torque);
  if (s.battery_voltage) rec["bv"] = *s.battery_voltage;
  if (s.battery_current) rec["bi"] = *s.battery_current;
  return rec;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

void validate_sample(const TelemetrySample& s, const std::string& source, std::size_t line) {
  if (!std::isfinite(s.t)) throw ParseError(source, line, "t", "non-finite timestamp");
  if (s.t < 0.0) throw ParseError(source, line, "t", "negative timestamp");
  if (!all_finite(s.base_position)) throw ParseError(source, line, "p", "non-finite value");
  if (!all_finite(s.base_orientation.coeffs())) throw ParseError(source, line, "q", "non-finite value");
  if (std::abs(s.base_orientation.norm() - 1.0) > kQuatNormTol) {
    throw ParseError(source, line, "q", "quaternion is not unit length");
  }
  if (!all_finite(s.base_lin_vel)) throw ParseError(source, line, "v", "non-finite value");
  if (!all_finite(s.base_ang_vel)) throw ParseError(source, line, "w", "non-finite value");
  if (!all_finite(s.joint_pos)) throw ParseError(source, line, "jq", "non-finite value");
  if (!all_finite(s.joint_vel)) throw ParseError(source, line, "jv", "non-finite value");
  if (!all_finite(s.joint_torque)) throw ParseError(source, line, "tau", "non-finite value");
  if (s.battery_voltage && !std::isfinite(*s.battery_voltage)) {
    throw ParseError(source, line, "bv", "non-finite value");
  }
  if (s.battery_current && !std::isfinite(*s.battery_current)) {
    throw ParseError(source, line, "bi", "non-finite value");
  }
}

void validate_log(const TelemetryLog& log) {
  for (std::size_t i = 0; i < log.samples.size(); ++i) {
    validate_sample(log.samples[i], "<log>", i + 1);
    if (i > 0 && !(log.samples[i].t > log.samples[i - 1].t)) {
      throw ParseError("<log>", i + 1, "t", "timestamps must be strictly increasing");
    }
  }
}

TelemetryLog parse_log(std::istream& in, const std::string& source_name) {
  TelemetryLog log;
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line) || line.front() == '#') continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source_name, line_no, "", std::string("invalid record: ") + e.what());
    }
    if (!record.is_object()) throw ParseError(source_name, line_no, "", "record is not an object");

    if (!record.contains("t")) {
      if (seen_header || !log.samples.empty()) {
        throw ParseError(source_name, line_no, "t", "missing field");
      }
      seen_header = true;
      if (auto it = record.find("mission"); it != record.end() && it->is_string()) log.metadata.mission = *it;
      if (auto it = record.find("plot"); it != record.end() && it->is_string()) log.metadata.plot = *it;
      if (auto it = record.find("rate_hz"); it != record.end()) {
        if (!it->is_number()) throw ParseError(source_name, line_no, "rate_hz", "expected a number");
        log.metadata.rate_hz = it->get<double>();
      }
      continue;
    }

    TelemetrySample s = sample_from_json(record, source_name, line_no);
    if (!log.samples.empty() && !(s.t > log.samples.back().t)) {
      throw ParseError(source_name, line_no, "t", "timestamps must be strictly increasing");
    }
    log.samples.push_back(std::move(s));
  }
  return log;
}

TelemetryLog parse_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open telemetry log");
  return parse_log(in, path.string());
}

void write_log(std::ostream& out, const TelemetryLog& log) {
  ordered_json header;
  header["mission"] = log.metadata.mission;
  header["plot"] = log.metadata.plot;
  header["rate_hz"] = log.metadata.rate_hz;
  out << header.dump() << '\n';
  for (const auto& s : log.samples) out << sample_to_json(s).dump() << '\n';
}

void write_log(const std::filesystem::path& path, const TelemetryLog& log) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::parse, "cannot write telemetry log: " + path.string());
  write_log(out, log);
}

BaseAttitude attitude_of(const Eigen::Quaterniond& orientation) {
  const Eigen::Quaterniond q = orientation.normalized();
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();

  BaseAttitude a;
  const double sin_pitch = std::clamp(2.0 * (w * y - z * x), -1.0, 1.0);
  a.pitch = std::asin(sin_pitch);
  if (std::abs(std::abs(a.pitch) - std::numbers::pi / 2.0) < kGimbalTol) {
    // Only roll - yaw (or roll + yaw) is observable; report it all as roll.
    a.gimbal_locked = true;
    a.yaw = 0.0;
    const Eigen::Matrix3d r = q.toRotationMatrix();
    a.roll = std::atan2(-r(1, 2), r(1, 1));
  } else {
    a.roll = std::atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y));
    a.yaw = std::atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z));
  }
  a.total_inclination = total_inclination(a.roll, a.pitch);
  return a;
}

BaseAttitude attitude_of(const TelemetrySample& sample) { return attitude_of(sample.base_orientation); }

Eigen::Quaterniond quaternion_from_rpy(double roll, double pitch, double yaw) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                            Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
                            Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()));
}

double total_inclination(double roll, double pitch) {
  return std::acos(std::clamp(std::cos(roll) * std::cos(pitch), -1.0, 1.0));
}

AttitudeExtremes attitude_extremes(const TelemetryLog& log) {
  AttitudeExtremes ex;
  if (log.samples.empty()) return ex;
  double sum = 0.0;
  for (const auto& s : log.samples) {
    const BaseAttitude a = attitude_of(s);
    ex.max_abs_roll = std::max(ex.max_abs_roll, std::abs(a.roll));
    ex.max_abs_pitch = std::max(ex.max_abs_pitch, std::abs(a.pitch));
    ex.max_total_inclination = std::max(ex.max_total_inclination, a.total_inclination);
    sum += a.total_inclination;
  }
  ex.mean_total_inclination = sum / static_cast<double>(log.samples.size());
  return ex;
}

double trapezoid(std::span<const double> times, std::span<const double> values) {
  double acc = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    acc += 0.5 * (values[i] + values[i - 1]) * (times[i] - times[i - 1]);
  }
  return acc;
}

double trapezoid_window(std::span<const double> times, std::span<const double> values, double t0, double t1) {
  double acc = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double a = std::max(times[i - 1], t0);
    const double b = std::min(times[i], t1);
    if (!(b > a)) continue;
    const double span = times[i] - times[i - 1];
    auto lerp = [&](double t) { return values[i - 1] + (values[i] - values[i - 1]) * ((t - times[i - 1]) / span); };
    const double fa = a == times[i - 1] ? values[i - 1] : lerp(a);
    const double fb = b == times[i] ? values[i] : lerp(b);
    acc += 0.5 * (fa + fb) * (b - a);
  }
  return acc;
}

std::vector<double> power_series(const TelemetryLog& log) {
  std::vector<double> power;
  power.reserve(log.samples.size());
  for (std::size_t i = 0; i < log.samples.size(); ++i) {
    const auto& s = log.samples[i];
    if (!s.battery_voltage || !s.battery_current) {
      fail(ErrorKind::numeric, "battery channel absent at sample " + std::to_string(i + 1) +
                                   " (bv/bi are required for power and energy)");
    }
    power.push_back(*s.battery_voltage * *s.battery_current);
  }
  return power;
}

PowerSummary power_summary(const TelemetryLog& log, std::optional<double> pack_capacity_wh) {
  if (log.samples.size() < 2) fail(ErrorKind::numeric, "power summary needs at least 2 samples");
  const std::vector<double> power = power_series(log);
  std::vector<double> times;
  times.reserve(log.samples.size());
  for (const auto& s : log.samples) times.push_back(s.t);

  PowerSummary out;
  out.duration = times.back() - times.front();
  out.energy = trapezoid(times, power) / 3600.0;
  out.mean_power = out.energy * 3600.0 / out.duration;
  if (pack_capacity_wh) {
    if (!(*pack_capacity_wh > 0.0)) fail(ErrorKind::usage, "pack capacity must be positive");
    out.battery_percent_used = 100.0 * out.energy / *pack_capacity_wh;
  }
  return out;
}

std::vector<BaseAcceleration> base_accelerations(const TelemetryLog& log, int window) {
  if (window < 3 || window % 2 == 0) fail(ErrorKind::usage, "smoothing window must be odd and >= 3");
  const auto n = static_cast<int>(log.samples.size());
  std::vector<BaseAcceleration> out(static_cast<std::size_t>(n));
  if (n < 2) return out;

  const int half = window / 2;
  for (int i = 0; i < n; ++i) {
    int lo = i - half;
    int hi = i + half;
    if (lo < 0) {
      hi = std::min(n - 1, hi - lo);
      lo = 0;
    }
    if (hi > n - 1) {
      lo = std::max(0, lo - (hi - (n - 1)));
      hi = n - 1;
    }
    const int count = hi - lo + 1;
    const int degree = std::min(2, count - 1);
    const double ti = log.samples[static_cast<std::size_t>(i)].t;

    Eigen::MatrixXd design(count, degree + 1);
    Eigen::MatrixXd rhs(count, 6);
    for (int k = 0; k < count; ++k) {
      const auto& s = log.samples[static_cast<std::size_t>(lo + k)];
      const double dt = s.t - ti;
      double p = 1.0;
      for (int d = 0; d <= degree; ++d) {
        design(k, d) = p;
        p *= dt;
      }
      rhs.block<1, 3>(k, 0) = s.base_lin_vel.transpose();
      rhs.block<1, 3>(k, 3) = s.base_ang_vel.transpose();
    }
    const Eigen::MatrixXd coeffs = design.colPivHouseholderQr().solve(rhs);
    auto& acc = out[static_cast<std::size_t>(i)];
    acc.linear = coeffs.block<1, 3>(1, 0).transpose();
    acc.angular = coeffs.block<1, 3>(1, 3).transpose();
  }
  return out;
}

}  // namespace screekit
