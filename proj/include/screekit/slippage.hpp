#pragma once

#include <array>
#include <optional>
#include <utility>

#include "screekit/contact.hpp"
#include "screekit/kinematics.hpp"
#include "screekit/telemetry.hpp"

namespace screekit {

/// Contact gating of the foot-speed integrand.
enum class ContactWeighting {
  states,         // hysteresis-binarized c_i in {0, 1}
  probabilities,  // raw sigmoid output as a weight
};

struct SlippageOptions {
  std::optional<std::pair<double, double>> window;  // default: whole log
  bool horizontal_only = false;                     // use xy speeds only
  ContactWeighting weighting = ContactWeighting::states;
};

inline constexpr double kMinBaseDistance = 1e-6;

struct SlippageReport {
  double s = 0.0;
  std::array<double, 4> per_foot_slip_distance{};  // m
  double base_distance = 0.0;                       // m
  double t0 = 0.0;
  double tf = 0.0;
};

/// Contact-gated foot travel over base travel, both trapezoidal integrals on
/// the log's own timestamps. Throws Error(numeric) when the base moved less
/// than kMinBaseDistance.
SlippageReport slippage_metric(const TelemetryLog& log, const QuadrupedModel& model, const ContactTimeline& timeline,
                               const SlippageOptions& options = {});

}  // namespace screekit
