#include <cmath>
#include <numbers>
#include <sstream>

#include <doctest.h>

#include "screekit/error.hpp"
#include "screekit/telemetry.hpp"

using namespace screekit;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

TelemetryLog constant_power_log(double seconds, double rate, double volts, double amps) {
  TelemetryLog log;
  const int n = static_cast<int>(std::lround(seconds * rate));
  for (int k = 0; k <= n; ++k) {
    TelemetrySample s;
    s.t = k / rate;
    s.battery_voltage = volts;
    s.battery_current = amps;
    log.samples.push_back(s);
  }
  return log;
}

std::string sample_line(double t, const std::string& extra = "") {
  std::string zeros12 = "[0,0,0,0,0,0,0,0,0,0,0,0]";
  return "{\"t\":" + std::to_string(t) + ",\"p\":[0,0,0.5],\"q\":[1,0,0,0],\"v\":[0,0,0],\"w\":[0,0,0],\"jq\":" +
         zeros12 + ",\"jv\":" + zeros12 + ",\"tau\":" + zeros12 + extra + "}\n";
}

// Angle between the body z-axis and world vertical, from the rotation matrix.
double tilt_from_matrix(const Eigen::Quaterniond& q) {
  const Eigen::Vector3d z = q.toRotationMatrix().col(2);
  return std::atan2(z.head<2>().norm(), z.z());
}

}  // namespace

TEST_SUITE("telemetry") {
  TEST_CASE("round trip is bit exact") {
    TelemetryLog log;
    log.metadata = {"m1", "NI 1", 50.0};
    for (int k = 0; k < 5; ++k) {
      TelemetrySample s;
      s.t = 0.1 * k + 1.0 / 3.0;
      s.base_position = Eigen::Vector3d(0.1, -2.0 / 7.0, 0.45 + 1e-17 * k);
      s.base_orientation = quaternion_from_rpy(0.1 * k, -0.05, 1.0 / 3.0);
      s.base_lin_vel = Eigen::Vector3d::Random();
      s.base_ang_vel = Eigen::Vector3d::Random();
      s.joint_pos = JointVector::Random();
      s.joint_vel = JointVector::Random();
      s.joint_torque = JointVector::Random() * 40.0;
      if (k % 2 == 0) {
        s.battery_voltage = 51.7;
        s.battery_current = 4.0 + 0.1 * k;
      }
      log.samples.push_back(s);
    }
    std::stringstream first;
    write_log(first, log);
    const TelemetryLog back = parse_log(first, "mem");
    std::stringstream second;
    write_log(second, back);
    CHECK(first.str() == second.str());
    CHECK(back.metadata.plot == "NI 1");
    REQUIRE(back.samples.size() == log.samples.size());
    for (std::size_t i = 0; i < log.samples.size(); ++i) {
      CHECK(back.samples[i].t == log.samples[i].t);
      CHECK(back.samples[i].joint_torque == log.samples[i].joint_torque);
      CHECK(back.samples[i].base_orientation.coeffs() == log.samples[i].base_orientation.coeffs());
      CHECK(back.samples[i].battery_current.has_value() == log.samples[i].battery_current.has_value());
    }
  }

  TEST_CASE("comments and blank lines are skipped") {
    std::stringstream in("# header comment\n\n" + sample_line(0.0) + sample_line(0.5));
    CHECK(parse_log(in).samples.size() == 2);
  }

  TEST_CASE("malformed records report line and field") {
    SUBCASE("wrong arity") {
      std::string line = sample_line(0.0);
      line.replace(line.find("\"jq\":[0,"), 8, "\"jq\":[");
      std::stringstream in("# first line\n" + line);
      try {
        parse_log(in, "log.jsonl");
        FAIL("expected a parse error");
      } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(e.field() == "jq");
        CHECK(std::string(e.what()).find("expected 12 values, got 11") != std::string::npos);
        CHECK(e.kind() == ErrorKind::parse);
      }
    }
    SUBCASE("non-monotonic timestamps") {
      std::stringstream in(sample_line(1.0) + sample_line(1.0));
      CHECK_THROWS_WITH_AS(parse_log(in), doctest::Contains("strictly increasing"), ParseError);
    }
    SUBCASE("unknown field") {
      std::stringstream in(sample_line(0.0, ",\"zz\":1"));
      CHECK_THROWS_AS(parse_log(in), ParseError);
    }
    SUBCASE("non-unit quaternion") {
      std::string line = sample_line(0.0);
      line.replace(line.find("[1,0,0,0]"), 9, "[2,0,0,0]");
      std::stringstream in(line);
      CHECK_THROWS_AS(parse_log(in), ParseError);
    }
    SUBCASE("not json") {
      std::stringstream in("{\"t\": 0,,}\n");
      CHECK_THROWS_AS(parse_log(in), ParseError);
    }
  }

  TEST_CASE("missing file is a parse error") {
    CHECK_THROWS_AS(parse_log(std::filesystem::path("/nonexistent/log.jsonl")), ParseError);
  }

  TEST_CASE("pure roll gives total inclination equal to roll") {
    const BaseAttitude a = attitude_of(quaternion_from_rpy(30.0 * kDeg, 0.0, 0.7));
    CHECK(a.roll == doctest::Approx(30.0 * kDeg).epsilon(1e-12));
    CHECK(a.yaw == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(a.total_inclination == doctest::Approx(30.0 * kDeg).epsilon(1e-12));
  }

  TEST_CASE("inclination matches the body z-axis tilt") {
    for (double r : {-0.6, -0.2, 0.0, 0.35, 0.9}) {
      for (double p : {-1.0, -0.3, 0.0, 0.4, 1.2}) {
        const Eigen::Quaterniond q = quaternion_from_rpy(r, p, 0.3);
        const BaseAttitude a = attitude_of(q);
        CHECK(a.roll == doctest::Approx(r).epsilon(1e-10));
        CHECK(a.pitch == doctest::Approx(p).epsilon(1e-10));
        CHECK(a.total_inclination == doctest::Approx(tilt_from_matrix(q)).epsilon(1e-10));
      }
    }
    // 20 deg roll and pitch: arccos(cos^2(20 deg)) evaluated at 30 digits.
    const double tilt = attitude_of(quaternion_from_rpy(20.0 * kDeg, 20.0 * kDeg, 0.0)).total_inclination / kDeg;
    CHECK(tilt == doctest::Approx(27.990890717782833).epsilon(1e-12));
  }

  TEST_CASE("total inclination is symmetric and monotone") {
    for (double a = 0.0; a < 1.5; a += 0.1) {
      for (double b = 0.0; b < 1.5; b += 0.1) {
        CHECK(total_inclination(a, b) == doctest::Approx(total_inclination(b, a)));
        CHECK(total_inclination(a + 0.05, b) > total_inclination(a, b));
      }
    }
  }

  TEST_CASE("gimbal lock sets yaw to zero and flags it") {
    const Eigen::Quaterniond q = quaternion_from_rpy(0.3, std::numbers::pi / 2.0, 0.2);
    const BaseAttitude a = attitude_of(q);
    CHECK(a.gimbal_locked);
    CHECK(a.yaw == 0.0);
    // Reconstructed rotation must match the original.
    const Eigen::Quaterniond back = quaternion_from_rpy(a.roll, a.pitch, a.yaw);
    CHECK(back.angularDistance(q) < 1e-7);
  }

  TEST_CASE("constant power energy") {
    const PowerSummary p = power_summary(constant_power_log(600.0, 10.0, 52.0, 5.0));
    CHECK(std::abs(p.energy - 260.0 * 600.0 / 3600.0) < 1e-9);
    CHECK(p.mean_power == doctest::Approx(260.0));
    REQUIRE(p.battery_percent_used);
    CHECK(*p.battery_percent_used == doctest::Approx(100.0 * (130.0 / 3.0) / 932.0));
  }

  TEST_CASE("missing battery channel is a numeric error") {
    TelemetryLog log = constant_power_log(1.0, 10.0, 50.0, 1.0);
    log.samples[3].battery_current.reset();
    try {
      power_summary(log);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::numeric);
    }
  }

  TEST_CASE("trapezoid converges to a fine midpoint sum") {
    // Non-uniform timestamps, smooth integrand.
    std::vector<double> t, v;
    for (int k = 0; k <= 4000; ++k) {
      const double u = k / 4000.0;
      t.push_back(10.0 * u * u);
      v.push_back(std::sin(t.back()) + 0.1 * t.back());
    }
    const int steps = 1000000;
    double mid = 0.0;
    for (int k = 0; k < steps; ++k) {
      const double x = (k + 0.5) * 10.0 / steps;
      mid += (std::sin(x) + 0.1 * x) * 10.0 / steps;
    }
    CHECK(trapezoid(t, v) == doctest::Approx(mid).epsilon(1e-5));
  }

  TEST_CASE("windowed trapezoid interpolates at the edges") {
    const std::vector<double> t = {0.0, 1.0, 2.0, 3.0};
    const std::vector<double> v = {0.0, 1.0, 2.0, 3.0};  // v = t, so the integral is (b^2 - a^2) / 2
    CHECK(trapezoid_window(t, v, 0.5, 2.5) == doctest::Approx((2.5 * 2.5 - 0.25) / 2.0));
    CHECK(trapezoid_window(t, v, 0.0, 3.0) == doctest::Approx(trapezoid(t, v)));
    CHECK(trapezoid_window(t, v, 1.2, 1.2) == 0.0);
  }

  TEST_CASE("base accelerations are exact for quadratic velocity") {
    TelemetryLog log;
    for (int k = 0; k < 40; ++k) {
      TelemetrySample s;
      s.t = 0.02 * k;
      s.base_lin_vel = Eigen::Vector3d(1.0 + 0.5 * s.t * s.t, -2.0 * s.t, 0.0);
      s.base_ang_vel = Eigen::Vector3d(0.0, 0.0, 0.3 * s.t);
      log.samples.push_back(s);
    }
    const auto acc = base_accelerations(log);
    for (std::size_t k = 0; k < acc.size(); ++k) {
      const double t = log.samples[k].t;
      CHECK(acc[k].linear.x() == doctest::Approx(t).epsilon(1e-8));
      CHECK(acc[k].linear.y() == doctest::Approx(-2.0).epsilon(1e-8));
      CHECK(acc[k].angular.z() == doctest::Approx(0.3).epsilon(1e-8));
    }
    CHECK_THROWS_AS(base_accelerations(log, 4), Error);
  }
}
