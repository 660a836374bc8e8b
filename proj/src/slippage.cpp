#include "screekit/slippage.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "screekit/error.hpp"

namespace screekit {

namespace {

double speed(const Eigen::Vector3d& v, bool horizontal_only) {
  return horizontal_only ? v.head<2>().norm() : v.norm();
}

}  // namespace

SlippageReport slippage_metric(const TelemetryLog& log, const QuadrupedModel& model, const ContactTimeline& timeline,
                               const SlippageOptions& options) {
  const std::size_t n = log.samples.size();
  if (n < 2) fail(ErrorKind::numeric, "slippage needs at least 2 samples");
  if (timeline.t.size() != n) fail(ErrorKind::usage, "contact timeline length differs from the log");
  for (std::size_t k = 0; k < n; ++k) {
    if (timeline.t[k] != log.samples[k].t) {
      fail(ErrorKind::usage, "contact timeline timestamps do not match the log at sample " + std::to_string(k + 1));
    }
  }

  std::vector<double> times(n);
  std::vector<double> base_speed(n);
  std::array<std::vector<double>, 4> gated;
  for (auto& g : gated) g.resize(n);

  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = log.samples[k];
    times[k] = s.t;
    base_speed[k] = speed(s.base_lin_vel, options.horizontal_only);
    for (Leg leg : kAllLegs) {
      const auto i = static_cast<std::size_t>(leg_index(leg));
      const auto& foot = timeline.feet[i];
      const double weight = options.weighting == ContactWeighting::states ? static_cast<double>(foot.state[k])
                                                                          : foot.probability[k];
      gated[i][k] = weight == 0.0 ? 0.0 : weight * speed(foot_kinematics(model, s, leg).velocity, options.horizontal_only);
    }
  }

  SlippageReport report;
  report.t0 = times.front();
  report.tf = times.back();
  if (options.window) {
    const auto [t0, tf] = *options.window;
    if (!(t0 < tf) || t0 < times.front() || tf > times.back()) {
      fail(ErrorKind::usage, "slippage window must satisfy log start <= t0 < tf <= log end");
    }
    report.t0 = t0;
    report.tf = tf;
  }

  report.base_distance = trapezoid_window(times, base_speed, report.t0, report.tf);
  double numerator = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    report.per_foot_slip_distance[i] = trapezoid_window(times, gated[i], report.t0, report.tf);
    numerator += report.per_foot_slip_distance[i];
  }
  if (!(report.base_distance >= kMinBaseDistance)) {
    fail(ErrorKind::numeric, "insufficient motion: base travelled less than 1e-6 m in the window; "
                             "the slippage metric is undefined");
  }
  report.s = numerator / report.base_distance;
  return report;
}

}  // namespace screekit
