#include "screekit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>

#include <fmt/format.h>

#include "screekit/contact.hpp"
#include "screekit/error.hpp"

namespace screekit {

namespace {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

Eigen::Vector3d lateral_offset(const QuadrupedModel& model, Leg leg) {
  return {0.0, is_left(leg) ? model.l_hip : -model.l_hip, 0.0};
}

// One stance or swing segment of a foot trajectory.
struct FootSegment {
  bool stance = false;
  double t0 = 0.0;
  double t1 = 0.0;
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d end = Eigen::Vector3d::Zero();
  std::vector<const SlipEpisode*> slips;
};

struct FootTarget {
  Eigen::Vector3d position;
  Eigen::Vector3d velocity;
  bool stance;
};

// Integral of the slip velocity profile, normalised: S(0) = 0, S(1) = 1.
double slip_progress(double tau) { return tau - std::sin(kTwoPi * tau) / kTwoPi; }

class FootPlanner {
 public:
  FootPlanner(const GaitScenario& sc, const QuadrupedModel& model) : sc_(sc), model_(model) {
    for (Leg leg : kAllLegs) build(leg);
  }

  [[nodiscard]] FootTarget target(Leg leg, double t) const {
    const auto& segs = segments_[static_cast<std::size_t>(leg_index(leg))];
    const FootSegment* seg = &segs.back();
    for (const auto& s : segs) {
      if (t >= s.t0 && t < s.t1) {
        seg = &s;
        break;
      }
    }
    if (seg->stance) {
      Eigen::Vector3d pos = seg->start;
      Eigen::Vector3d vel = Eigen::Vector3d::Zero();
      for (const SlipEpisode* e : seg->slips) {
        const Eigen::Vector3d dir = slip_direction(*e);
        const double span = e->interval.t1 - e->interval.t0;
        if (t <= e->interval.t0) continue;
        if (t >= e->interval.t1) {
          pos += e->distance * dir;
          continue;
        }
        const double tau = (t - e->interval.t0) / span;
        pos += e->distance * slip_progress(tau) * dir;
        vel += e->distance / span * (1.0 - std::cos(kTwoPi * tau)) * dir;
      }
      return {pos, vel, true};
    }
    const double span = seg->t1 - seg->t0;
    const double tau = std::clamp((t - seg->t0) / span, 0.0, 1.0);
    const double m = tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau);
    const double dm = 30.0 * tau * tau * (1.0 - tau) * (1.0 - tau);
    const double bump = 64.0 * std::pow(tau * (1.0 - tau), 3);
    const double dbump = 192.0 * std::pow(tau * (1.0 - tau), 2) * (1.0 - 2.0 * tau);
    const Eigen::Vector3d delta = seg->end - seg->start;
    const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
    return {seg->start + m * delta + sc_.step_height * bump * up,
            (dm * delta + sc_.step_height * dbump * up) / span, false};
  }

  [[nodiscard]] bool in_stance(Leg leg, double t) const {
    for (const auto& iv : sc_.stance[static_cast<std::size_t>(leg_index(leg))]) {
      if (iv.contains(t) || (t == iv.t1 && iv.t1 >= sc_.duration)) return true;
    }
    return false;
  }

  static Eigen::Vector3d slip_direction(const SlipEpisode& e) {
    const Eigen::Vector2d d = e.direction.normalized();
    return {d.x(), d.y(), 0.0};
  }

 private:
  [[nodiscard]] Eigen::Vector3d nominal(Leg leg, double t) const {
    const BaseState b = sc_.base.at(t);
    const Eigen::Matrix3d rot = sc_.base.orientation(b.yaw).toRotationMatrix();
    const Eigen::Vector3d in_base = model_.hip_offset[static_cast<std::size_t>(leg_index(leg))] +
                                    lateral_offset(model_, leg) - sc_.stand_height * Eigen::Vector3d::UnitZ();
    return b.position + rot * in_base;
  }

  void build(Leg leg) {
    const auto li = static_cast<std::size_t>(leg_index(leg));
    std::vector<Interval> stance = sc_.stance[li];
    std::sort(stance.begin(), stance.end(), [](const Interval& a, const Interval& b) { return a.t0 < b.t0; });

    std::vector<FootSegment> segs;
    double cursor = 0.0;
    for (const auto& iv : stance) {
      if (iv.t0 > cursor) segs.push_back({false, cursor, iv.t0, {}, {}, {}});
      FootSegment st{true, iv.t0, iv.t1, nominal(leg, 0.5 * (iv.t0 + iv.t1)), {}, {}};
      for (const auto& e : sc_.slips) {
        if (e.leg == leg && e.interval.t0 >= iv.t0 && e.interval.t1 <= iv.t1) st.slips.push_back(&e);
      }
      st.end = st.start;
      for (const SlipEpisode* e : st.slips) st.end += e->distance * slip_direction(*e);
      segs.push_back(st);
      cursor = iv.t1;
    }
    if (cursor < sc_.duration || segs.empty()) segs.push_back({false, cursor, std::max(sc_.duration, cursor + 1e-9), {}, {}, {}});

    for (std::size_t k = 0; k < segs.size(); ++k) {
      auto& s = segs[k];
      if (s.stance) continue;
      s.start = (k > 0) ? segs[k - 1].end : nominal(leg, s.t0);
      s.end = (k + 1 < segs.size()) ? segs[k + 1].start : nominal(leg, s.t1);
    }
    // Stretch the last segment so t == duration is covered.
    segs.back().t1 = std::max(segs.back().t1, sc_.duration) + 1e-9;
    segments_[li] = std::move(segs);
  }

  const GaitScenario& sc_;
  const QuadrupedModel& model_;
  std::array<std::vector<FootSegment>, 4> segments_;
};

double hermite_eval(double p0, double v0, double p1, double v1, double h, double s, double* deriv) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  if (deriv) {
    const double d00 = 6 * s2 - 6 * s;
    const double d10 = 3 * s2 - 4 * s + 1;
    const double d01 = -6 * s2 + 6 * s;
    const double d11 = 3 * s2 - 2 * s;
    *deriv = (d00 * p0 + d10 * h * v0 + d01 * p1 + d11 * h * v1) / h;
  }
  return h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1;
}

ordered_json vec_json(const Eigen::Vector3d& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }
Eigen::Vector3d vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

Leg leg_from_name(const std::string& name) {
  for (Leg leg : kAllLegs) {
    if (leg_name(leg) == name) return leg;
  }
  throw ParseError("", 0, "leg", "unknown leg '" + name + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Rng

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& w : s_) w = splitmix64(x);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(next() % span);
}

// ---------------------------------------------------------------------------
// Gait scenarios

BaseState BaseTrajectory::at(double t) const {
  BaseState st;
  if (keys.empty()) return st;
  if (keys.size() == 1 || t <= keys.front().t) {
    const auto& k = keys.front();
    st.position = k.position;
    st.yaw = k.yaw;
    if (keys.size() == 1) {
      st.velocity = Eigen::Vector3d::Zero();
      return st;
    }
  }
  std::size_t seg = 0;
  while (seg + 2 < keys.size() && t > keys[seg + 1].t) ++seg;
  const auto& a = keys[seg];
  const auto& b = keys[seg + 1];
  const double h = b.t - a.t;
  const double s = std::clamp((t - a.t) / h, 0.0, 1.0);
  for (int i = 0; i < 3; ++i) {
    double d = 0.0;
    st.position[i] = hermite_eval(a.position[i], a.velocity[i], b.position[i], b.velocity[i], h, s, &d);
    st.velocity[i] = d;
  }
  double dyaw = 0.0;
  st.yaw = hermite_eval(a.yaw, a.yaw_rate, b.yaw, b.yaw_rate, h, s, &dyaw);
  st.yaw_rate = dyaw;
  return st;
}

Eigen::Quaterniond BaseTrajectory::orientation(double yaw) const { return quaternion_from_rpy(roll, pitch, yaw); }

double BatteryProfile::current_at(double t) const {
  if (current.empty()) return 0.0;
  if (t <= current.front().first) return current.front().second;
  for (std::size_t i = 1; i < current.size(); ++i) {
    if (t <= current[i].first) {
      const auto& [t0, a0] = current[i - 1];
      const auto& [t1, a1] = current[i];
      return a0 + (a1 - a0) * (t - t0) / (t1 - t0);
    }
  }
  return current.back().second;
}

void GaitScenario::validate() const {
  if (!(duration > 0.0)) fail(ErrorKind::usage, "scenario duration must be > 0");
  if (!(rate_hz > 0.0)) fail(ErrorKind::usage, "scenario rate must be > 0");
  if (base.keys.empty()) fail(ErrorKind::usage, "scenario needs at least one base keyframe");
  for (std::size_t i = 1; i < base.keys.size(); ++i) {
    if (!(base.keys[i].t > base.keys[i - 1].t)) fail(ErrorKind::usage, "base keyframes must have increasing times");
  }
  if (base.keys.size() > 1 && (base.keys.front().t > 0.0 || base.keys.back().t < duration)) {
    fail(ErrorKind::usage, "base keyframes must span [0, duration]");
  }
  for (std::size_t i = 0; i < 4; ++i) {
    auto ivs = stance[i];
    std::sort(ivs.begin(), ivs.end(), [](const Interval& a, const Interval& b) { return a.t0 < b.t0; });
    for (std::size_t k = 0; k < ivs.size(); ++k) {
      if (!(ivs[k].t1 > ivs[k].t0)) fail(ErrorKind::usage, "stance intervals must have positive length");
      if (ivs[k].t0 < 0.0 || ivs[k].t1 > duration + 1e-9) fail(ErrorKind::usage, "stance interval outside the scenario span");
      if (k > 0 && ivs[k].t0 < ivs[k - 1].t1) fail(ErrorKind::usage, "stance intervals of one foot overlap");
    }
  }
  for (const auto& e : slips) {
    if (!(e.interval.t1 > e.interval.t0) || !(e.distance >= 0.0) || !(e.direction.norm() > 0.0)) {
      fail(ErrorKind::usage, "slip episode needs positive duration, non-negative distance and a direction");
    }
    bool inside = false;
    for (const auto& iv : stance[static_cast<std::size_t>(leg_index(e.leg))]) {
      inside = inside || (e.interval.t0 >= iv.t0 && e.interval.t1 <= iv.t1);
    }
    if (!inside) {
      fail(ErrorKind::usage, fmt::format("slip episode of {} at [{:g}, {:g}] s is not inside a stance interval",
                                         leg_name(e.leg), e.interval.t0, e.interval.t1));
    }
  }
}

SynthTelemetry synth_telemetry(const GaitScenario& sc, const QuadrupedModel& model) {
  sc.validate();
  model.validate();
  const FootPlanner feet(sc, model);
  Rng rng(sc.seed);

  SynthTelemetry out;
  out.log.metadata = {sc.mission, sc.plot, sc.rate_hz};
  const auto n = static_cast<std::size_t>(std::llround(sc.duration * sc.rate_hz));
  auto& truth = out.sidecar;

  for (std::size_t k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) / sc.rate_hz;
    const BaseState b = sc.base.at(t);
    TelemetrySample s;
    s.t = t;
    s.base_position = b.position;
    s.base_orientation = sc.base.orientation(b.yaw);
    s.base_lin_vel = b.velocity;
    s.base_ang_vel = Eigen::Vector3d(0.0, 0.0, b.yaw_rate);
    const Eigen::Matrix3d rot = s.base_orientation.toRotationMatrix();

    std::array<bool, 4> stance{};
    int n_stance = 0;
    for (Leg leg : kAllLegs) {
      const auto i = static_cast<std::size_t>(leg_index(leg));
      const FootTarget ft = feet.target(leg, t);
      stance[i] = feet.in_stance(leg, t);
      n_stance += stance[i] ? 1 : 0;
      const Eigen::Vector3d offset_world = ft.position - b.position;
      const Eigen::Vector3d in_base = rot.transpose() * offset_world;
      const auto q = leg_inverse_kinematics(model, in_base, leg);
      if (!q) {
        fail(ErrorKind::usage,
             fmt::format("unreachable foot target at t = {:g} s for leg {}", t, leg_name(leg)));
      }
      const Eigen::Matrix3d j = leg_jacobian(model, *q, leg);
      const Eigen::Vector3d rel_vel = rot.transpose() * (ft.velocity - b.velocity - s.base_ang_vel.cross(offset_world));
      s.joint_pos.segment<3>(3 * static_cast<Eigen::Index>(i)) = *q;
      s.joint_vel.segment<3>(3 * static_cast<Eigen::Index>(i)) = j.partialPivLu().solve(rel_vel);
    }

    const double load = n_stance > 0 ? model.base_mass * model.gravity / n_stance : 0.0;
    for (Leg leg : kAllLegs) {
      const auto i = static_cast<std::size_t>(leg_index(leg));
      const double fz = stance[i] ? load : 0.0;
      const LegJoints tau = torques_from_force(model, s, leg, Eigen::Vector3d(0.0, 0.0, fz));
      s.joint_torque.segment<3>(3 * static_cast<Eigen::Index>(i)) = tau;
      truth.contact[i].push_back(stance[i] ? 1 : 0);
      truth.f_vertical[i].push_back(fz);
    }
    if (sc.torque_noise > 0.0) {
      for (Eigen::Index j = 0; j < 12; ++j) s.joint_torque[j] += rng.uniform(-sc.torque_noise, sc.torque_noise);
    }
    if (sc.velocity_noise > 0.0) {
      for (Eigen::Index j = 0; j < 12; ++j) s.joint_vel[j] += rng.uniform(-sc.velocity_noise, sc.velocity_noise);
    }
    if (sc.battery) {
      s.battery_voltage = sc.battery->voltage;
      s.battery_current = sc.battery->current_at(t);
    }
    truth.t.push_back(t);
    out.log.samples.push_back(std::move(s));
  }

  // Ground-truth integrals on a grid 100x finer than the log.
  const std::size_t fine_n = n * static_cast<std::size_t>(truth.fine_factor);
  const double dt = sc.duration / static_cast<double>(fine_n);
  std::array<double, 4> prev_foot{};
  double prev_base = 0.0;
  for (std::size_t k = 0; k <= fine_n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double base_speed = sc.base.at(t).velocity.norm();
    std::array<double, 4> foot{};
    for (Leg leg : kAllLegs) {
      const auto i = static_cast<std::size_t>(leg_index(leg));
      foot[i] = feet.in_stance(leg, t) ? feet.target(leg, t).velocity.norm() : 0.0;
    }
    if (k > 0) {
      truth.base_distance += 0.5 * (base_speed + prev_base) * dt;
      for (std::size_t i = 0; i < 4; ++i) truth.per_foot_slip_distance[i] += 0.5 * (foot[i] + prev_foot[i]) * dt;
    }
    prev_base = base_speed;
    prev_foot = foot;
  }
  if (truth.base_distance >= 1e-6) {
    double total = 0.0;
    for (double d : truth.per_foot_slip_distance) total += d;
    truth.s = total / truth.base_distance;
  }
  return out;
}

std::array<std::vector<Interval>, 4> periodic_schedule(double duration, double period, double duty,
                                                       const std::array<double, 4>& phase) {
  if (!(period > 0.0) || !(duty > 0.0 && duty <= 1.0)) fail(ErrorKind::usage, "gait period and duty must be positive");
  std::array<std::vector<Interval>, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    // Cycle c has stance [c + phase, c + phase + duty) * period.
    for (int c = -1; (c + phase[i]) * period < duration; ++c) {
      const double a = std::max(0.0, (c + phase[i]) * period);
      const double b = std::min(duration, (c + phase[i] + duty) * period);
      if (b - a > 1e-9) out[i].push_back({a, b});
    }
  }
  return out;
}

std::array<std::vector<Interval>, 4> full_stance(double duration) {
  std::array<std::vector<Interval>, 4> out;
  for (auto& v : out) v.push_back({0.0, duration});
  return out;
}

GaitScenario standing_scenario(double duration, std::uint64_t seed, double sway) {
  GaitScenario sc;
  sc.name = "standing";
  sc.duration = duration;
  sc.seed = seed;
  sc.stance = full_stance(duration);
  const Eigen::Vector3d home(0.0, 0.0, 0.5);
  if (sway <= 0.0) {
    sc.base.keys = {{0.0, home, Eigen::Vector3d::Zero(), 0.0, 0.0}, {duration, home, Eigen::Vector3d::Zero(), 0.0, 0.0}};
    return sc;
  }
  // Slow body sway through four offsets, at rest at each keyframe.
  const std::array<Eigen::Vector3d, 5> offsets = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(sway, 0, 0),
                                                  Eigen::Vector3d(0, sway, 0), Eigen::Vector3d(-sway, 0, 0),
                                                  Eigen::Vector3d(0, 0, 0)};
  for (std::size_t k = 0; k < offsets.size(); ++k) {
    const double t = duration * static_cast<double>(k) / static_cast<double>(offsets.size() - 1);
    sc.base.keys.push_back({t, home + offsets[k], Eigen::Vector3d::Zero(), 0.0, 0.0});
  }
  return sc;
}

GaitScenario straight_walk_scenario(double duration, double speed, std::uint64_t seed) {
  GaitScenario sc;
  sc.name = "straight_walk";
  sc.duration = duration;
  sc.seed = seed;
  const Eigen::Vector3d v(speed, 0.0, 0.0);
  sc.base.keys = {{0.0, Eigen::Vector3d(0.0, 0.0, 0.5), v, 0.0, 0.0},
                  {duration, Eigen::Vector3d(speed * duration, 0.0, 0.5), v, 0.0, 0.0}};
  sc.stance = periodic_schedule(duration, 0.8, 0.6, {0.0, 0.5, 0.5, 0.0});
  sc.battery = BatteryProfile{52.0, {{0.0, 5.0}, {duration, 5.6}}};
  return sc;
}

GaitScenario turning_walk_scenario(double duration, double speed, double yaw_rate, std::uint64_t seed) {
  GaitScenario sc;
  sc.name = "turning_walk";
  sc.duration = duration;
  sc.seed = seed;
  // Arc of radius speed / yaw_rate, sampled once per second.
  const double radius = speed / yaw_rate;
  const int knots = std::max(2, static_cast<int>(std::ceil(duration)) + 1);
  for (int k = 0; k < knots; ++k) {
    const double t = duration * k / (knots - 1);
    const double yaw = yaw_rate * t;
    const Eigen::Vector3d p(radius * std::sin(yaw), radius * (1.0 - std::cos(yaw)), 0.5);
    const Eigen::Vector3d v(speed * std::cos(yaw), speed * std::sin(yaw), 0.0);
    sc.base.keys.push_back({t, p, v, yaw, yaw_rate});
  }
  sc.stance = periodic_schedule(duration, 0.8, 0.6, {0.0, 0.5, 0.5, 0.0});
  sc.battery = BatteryProfile{51.5, {{0.0, 5.2}, {duration, 6.0}}};
  return sc;
}

void add_random_slips(GaitScenario& sc, int count, Rng& rng) {
  struct Slot {
    Leg leg;
    Interval iv;
  };
  std::vector<Slot> slots;
  for (Leg leg : kAllLegs) {
    for (const auto& iv : sc.stance[static_cast<std::size_t>(leg_index(leg))]) {
      if (iv.t1 - iv.t0 >= 0.3) slots.push_back({leg, iv});
    }
  }
  for (int n = 0; n < count && !slots.empty(); ++n) {
    const auto pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(slots.size()) - 1));
    const Slot slot = slots[pick];
    slots.erase(slots.begin() + static_cast<std::ptrdiff_t>(pick));
    const double len = slot.iv.t1 - slot.iv.t0;
    const double span = std::min(rng.uniform(0.15, 0.25), len - 0.08);
    const double start = slot.iv.t0 + 0.04 + rng.uniform() * (len - 0.08 - span);
    const double angle = rng.uniform(0.0, kTwoPi);
    sc.slips.push_back({slot.leg, {start, start + span}, Eigen::Vector2d(std::cos(angle), std::sin(angle)),
                        rng.uniform(0.01, 0.04)});
  }
}

std::vector<GaitScenario> standard_scenario_suite() {
  std::vector<GaitScenario> suite;
  for (int i = 0; i < 20; ++i) {
    const auto seed = static_cast<std::uint64_t>(1000 + i);
    Rng rng(seed);
    GaitScenario sc;
    switch (i % 3) {
      case 0: sc = standing_scenario(6.0, seed); break;
      case 1: sc = straight_walk_scenario(8.0, 0.4, seed); break;
      default: sc = turning_walk_scenario(8.0, 0.3, 0.25, seed); break;
    }
    add_random_slips(sc, i % 4, rng);
    sc.torque_noise = 0.5;
    sc.name = fmt::format("{}_{:02d}", sc.name, i);
    sc.mission = sc.name;
    suite.push_back(std::move(sc));
  }
  return suite;
}

ordered_json scenario_to_json(const GaitScenario& sc) {
  ordered_json doc;
  doc["name"] = sc.name;
  doc["mission"] = sc.mission;
  doc["plot"] = sc.plot;
  doc["duration"] = sc.duration;
  doc["rate_hz"] = sc.rate_hz;
  doc["roll"] = sc.base.roll;
  doc["pitch"] = sc.base.pitch;
  auto& keys = doc["base"] = ordered_json::array();
  for (const auto& k : sc.base.keys) {
    keys.push_back({{"t", k.t}, {"p", vec_json(k.position)}, {"v", vec_json(k.velocity)}, {"yaw", k.yaw},
                    {"yaw_rate", k.yaw_rate}});
  }
  auto& st = doc["stance"] = ordered_json::object();
  for (Leg leg : kAllLegs) {
    auto& arr = st[std::string(leg_name(leg))] = ordered_json::array();
    for (const auto& iv : sc.stance[static_cast<std::size_t>(leg_index(leg))]) arr.push_back({iv.t0, iv.t1});
  }
  auto& slips = doc["slips"] = ordered_json::array();
  for (const auto& e : sc.slips) {
    slips.push_back({{"leg", std::string(leg_name(e.leg))},
                     {"t0", e.interval.t0},
                     {"t1", e.interval.t1},
                     {"direction", {e.direction.x(), e.direction.y()}},
                     {"distance", e.distance}});
  }
  doc["stand_height"] = sc.stand_height;
  doc["step_height"] = sc.step_height;
  doc["torque_noise"] = sc.torque_noise;
  doc["velocity_noise"] = sc.velocity_noise;
  if (sc.battery) {
    auto& bat = doc["battery"];
    bat["voltage"] = sc.battery->voltage;
    bat["current"] = ordered_json::array();
    for (const auto& [t, a] : sc.battery->current) bat["current"].push_back({t, a});
  }
  doc["seed"] = sc.seed;
  return doc;
}

GaitScenario scenario_from_json(const json& doc) {
  GaitScenario sc;
  try {
    sc.name = doc.value("name", sc.name);
    sc.mission = doc.value("mission", sc.mission);
    sc.plot = doc.value("plot", sc.plot);
    sc.duration = doc.at("duration").get<double>();
    sc.rate_hz = doc.value("rate_hz", sc.rate_hz);
    sc.base.roll = doc.value("roll", 0.0);
    sc.base.pitch = doc.value("pitch", 0.0);
    for (const auto& k : doc.at("base")) {
      sc.base.keys.push_back({k.at("t").get<double>(), vec_from(k.at("p")),
                              k.contains("v") ? vec_from(k.at("v")) : Eigen::Vector3d::Zero(), k.value("yaw", 0.0),
                              k.value("yaw_rate", 0.0)});
    }
    if (doc.contains("stance")) {
      for (Leg leg : kAllLegs) {
        const auto& st = doc.at("stance");
        const std::string key(leg_name(leg));
        if (!st.contains(key)) continue;
        for (const auto& iv : st.at(key)) {
          sc.stance[static_cast<std::size_t>(leg_index(leg))].push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
        }
      }
    } else {
      sc.stance = full_stance(sc.duration);
    }
    if (doc.contains("slips")) {
      for (const auto& e : doc.at("slips")) {
        SlipEpisode ep;
        ep.leg = leg_from_name(e.at("leg").get<std::string>());
        ep.interval = {e.at("t0").get<double>(), e.at("t1").get<double>()};
        ep.direction = {e.at("direction").at(0).get<double>(), e.at("direction").at(1).get<double>()};
        ep.distance = e.at("distance").get<double>();
        sc.slips.push_back(ep);
      }
    }
    sc.stand_height = doc.value("stand_height", sc.stand_height);
    sc.step_height = doc.value("step_height", sc.step_height);
    sc.torque_noise = doc.value("torque_noise", 0.0);
    sc.velocity_noise = doc.value("velocity_noise", 0.0);
    if (doc.contains("battery")) {
      if (doc.at("battery").is_null()) {
        sc.battery.reset();
      } else {
        BatteryProfile bat;
        bat.voltage = doc.at("battery").at("voltage").get<double>();
        bat.current.clear();
        for (const auto& p : doc.at("battery").at("current")) bat.current.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
        sc.battery = bat;
      }
    }
    sc.seed = doc.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ParseError("", 0, "", std::string("invalid gait scenario: ") + e.what());
  }
  sc.validate();
  return sc;
}

ordered_json sidecar_to_json(const GroundTruthSidecar& sc) {
  ordered_json doc;
  doc["fine_factor"] = sc.fine_factor;
  doc["s"] = sc.s ? ordered_json(*sc.s) : ordered_json(nullptr);
  doc["base_distance"] = sc.base_distance;
  doc["per_foot_slip_distance"] = ordered_json::array();
  for (double d : sc.per_foot_slip_distance) doc["per_foot_slip_distance"].push_back(d);
  doc["t"] = sc.t;
  auto& contact = doc["contact"] = ordered_json::object();
  auto& force = doc["f_vertical"] = ordered_json::object();
  for (Leg leg : kAllLegs) {
    const auto i = static_cast<std::size_t>(leg_index(leg));
    contact[std::string(leg_name(leg))] = sc.contact[i];
    force[std::string(leg_name(leg))] = sc.f_vertical[i];
  }
  return doc;
}

GroundTruthSidecar sidecar_from_json(const json& doc) {
  GroundTruthSidecar sc;
  try {
    sc.fine_factor = doc.at("fine_factor").get<int>();
    if (!doc.at("s").is_null()) sc.s = doc.at("s").get<double>();
    sc.base_distance = doc.at("base_distance").get<double>();
    for (std::size_t i = 0; i < 4; ++i) sc.per_foot_slip_distance[i] = doc.at("per_foot_slip_distance").at(i).get<double>();
    sc.t = doc.at("t").get<std::vector<double>>();
    for (Leg leg : kAllLegs) {
      const auto i = static_cast<std::size_t>(leg_index(leg));
      sc.contact[i] = doc.at("contact").at(std::string(leg_name(leg))).get<std::vector<int>>();
      sc.f_vertical[i] = doc.at("f_vertical").at(std::string(leg_name(leg))).get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw ParseError("", 0, "", std::string("invalid sidecar: ") + e.what());
  }
  return sc;
}

// ---------------------------------------------------------------------------
// Images

namespace {

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

struct Ellipse {
  double cx, cy, rx, ry;
  double vigor;
  [[nodiscard]] bool contains(double x, double y) const {
    const double dx = (x - cx) / rx;
    const double dy = (y - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
  }
};

SynthImage scene_image(const ImageSpec& spec) {
  Rng rng(spec.seed);
  const int w = spec.width;
  const int h = spec.height;
  const bool low = spec.contrast == SceneContrast::low;
  SynthImage out{RgbImage(w, h), GrayImage(w, h), 0};

  // Vegetation patches until the requested cover is reached.
  std::vector<Ellipse> patches;
  std::vector<int> owner(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), -1);
  const auto target = static_cast<std::size_t>(std::llround(spec.fraction * w * h));
  std::size_t covered = 0;
  for (int guard = 0; covered < target && guard < 10000; ++guard) {
    const double scale = std::min(w, h);
    Ellipse e{rng.uniform(0.0, w), rng.uniform(0.0, h), rng.uniform(0.03, 0.12) * scale,
              rng.uniform(0.03, 0.12) * scale, low ? rng.uniform(0.3, 1.0) : rng.uniform(0.6, 1.0)};
    const int id = static_cast<int>(patches.size());
    patches.push_back(e);
    for (int y = std::max(0, static_cast<int>(e.cy - e.ry)); y <= std::min(h - 1, static_cast<int>(e.cy + e.ry)); ++y) {
      for (int x = std::max(0, static_cast<int>(e.cx - e.rx)); x <= std::min(w - 1, static_cast<int>(e.cx + e.rx)); ++x) {
        const auto idx = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
        if (owner[idx] >= 0 || !e.contains(x + 0.5, y + 0.5)) continue;
        if (covered >= target) break;
        owner[idx] = id;
        ++covered;
      }
    }
  }

  // Rock palette chosen per 8x8 block; low light darkens and adds sensor noise.
  const std::array<std::array<double, 3>, 3> rocks = {{{150, 145, 140}, {185, 180, 172}, {150, 132, 118}}};
  const std::array<double, 3> dry = {120, 118, 90};
  const std::array<double, 3> green = {55, 140, 40};
  const double gain = low ? 0.35 : 1.0;
  const double chroma = low ? 6.0 : 2.0;
  const double luma = low ? 10.0 : 25.0;
  const int blocks_x = (w + 7) / 8;
  std::vector<int> block_tone(static_cast<std::size_t>(blocks_x * ((h + 7) / 8)));
  for (auto& b : block_tone) b = rng.uniform_int(0, 2);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto idx = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
      std::array<double, 3> base;
      if (owner[idx] >= 0) {
        const double v = patches[static_cast<std::size_t>(owner[idx])].vigor;
        for (int c = 0; c < 3; ++c) base[static_cast<std::size_t>(c)] = dry[static_cast<std::size_t>(c)] + v * (green[static_cast<std::size_t>(c)] - dry[static_cast<std::size_t>(c)]);
        out.mask.data[idx] = 1;
        ++out.vegetation_pixels;
      } else {
        base = rocks[static_cast<std::size_t>(block_tone[static_cast<std::size_t>((y / 8) * blocks_x + x / 8)])];
      }
      const double l = rng.uniform(-luma, luma);
      const std::uint8_t r = clamp_byte(gain * (base[0] + l) + rng.uniform(-chroma, chroma));
      const std::uint8_t g = clamp_byte(gain * (base[1] + l) + rng.uniform(-chroma, chroma));
      const std::uint8_t b = clamp_byte(gain * (base[2] + l) + rng.uniform(-chroma, chroma));
      out.image.set(x, y, r, g, b);
    }
  }
  return out;
}

}  // namespace

SynthImage synth_image(const ImageSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) fail(ErrorKind::usage, "image size must be positive");
  if (!(spec.fraction >= 0.0 && spec.fraction <= 1.0)) fail(ErrorKind::usage, "vegetation fraction must lie in [0, 1]");
  const int w = spec.width;
  const int h = spec.height;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  SynthImage out{RgbImage(w, h), GrayImage(w, h), 0};
  auto paint = [&](std::size_t idx, bool veg) {
    const std::uint8_t r = veg ? 0 : 128, g = veg ? 255 : 128, b = veg ? 0 : 128;
    out.image.data[3 * idx] = r;
    out.image.data[3 * idx + 1] = g;
    out.image.data[3 * idx + 2] = b;
    out.mask.data[idx] = veg ? 1 : 0;
    if (veg) ++out.vegetation_pixels;
  };

  switch (spec.pattern) {
    case ImagePattern::background:
      for (std::size_t i = 0; i < n; ++i) paint(i, false);
      break;
    case ImagePattern::half: {
      const auto cols = static_cast<int>(std::lround(spec.fraction * w));
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) paint(static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x), x < cols);
      }
      break;
    }
    case ImagePattern::dithered: {
      std::vector<std::size_t> order(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      Rng rng(spec.seed);
      for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[static_cast<std::size_t>(rng.next() % (i + 1))]);
      const auto count = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(n)));
      std::vector<bool> veg(n, false);
      for (std::size_t i = 0; i < count; ++i) veg[order[i]] = true;
      for (std::size_t i = 0; i < n; ++i) paint(i, veg[i]);
      break;
    }
    case ImagePattern::scene:
      return scene_image(spec);
  }
  return out;
}

std::vector<ImageSpec> cover_benchmark(SceneContrast contrast, int count) {
  std::vector<ImageSpec> specs;
  for (int i = 0; i < count; ++i) {
    ImageSpec s;
    s.name = fmt::format("{}_{:02d}", contrast == SceneContrast::high ? "bright" : "dim", i);
    s.pattern = ImagePattern::scene;
    s.width = 160;
    s.height = 120;
    s.fraction = 0.08 + 0.05 * i;
    s.contrast = contrast;
    s.seed = static_cast<std::uint64_t>(500 + i + (contrast == SceneContrast::low ? 100 : 0));
    specs.push_back(s);
  }
  return specs;
}

ordered_json image_spec_to_json(const ImageSpec& s) {
  static constexpr std::array kPatterns = {"half", "dithered", "background", "scene"};
  ordered_json doc;
  doc["name"] = s.name;
  doc["pattern"] = kPatterns[static_cast<std::size_t>(s.pattern)];
  doc["width"] = s.width;
  doc["height"] = s.height;
  doc["fraction"] = s.fraction;
  doc["contrast"] = s.contrast == SceneContrast::high ? "high" : "low";
  doc["seed"] = s.seed;
  return doc;
}

ImageSpec image_spec_from_json(const json& doc) {
  ImageSpec s;
  try {
    s.name = doc.value("name", s.name);
    const std::string pattern = doc.value("pattern", std::string("half"));
    if (pattern == "half") s.pattern = ImagePattern::half;
    else if (pattern == "dithered") s.pattern = ImagePattern::dithered;
    else if (pattern == "background") s.pattern = ImagePattern::background;
    else if (pattern == "scene") s.pattern = ImagePattern::scene;
    else throw ParseError("", 0, "pattern", "unknown image pattern '" + pattern + "'");
    s.width = doc.value("width", s.width);
    s.height = doc.value("height", s.height);
    s.fraction = doc.value("fraction", s.fraction);
    const std::string contrast = doc.value("contrast", std::string("high"));
    if (contrast != "high" && contrast != "low") throw ParseError("", 0, "contrast", "expected 'high' or 'low'");
    s.contrast = contrast == "high" ? SceneContrast::high : SceneContrast::low;
    s.seed = doc.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ParseError("", 0, "", std::string("invalid image spec: ") + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Detection scenes

namespace {

BBox jittered(const BBox& b, double jitter, Rng& rng) {
  BBox p = b;
  p.cx += jitter * b.w * rng.uniform(-1.0, 1.0);
  p.cy += jitter * b.h * rng.uniform(-1.0, 1.0);
  p.w *= 1.0 + jitter * rng.uniform(-1.0, 1.0);
  p.h *= 1.0 + jitter * rng.uniform(-1.0, 1.0);
  return p;
}

// Largest matching between preds and gts (same class, IoU >= threshold).
std::size_t max_matching(const std::vector<BBox>& preds, const std::vector<BBox>& gts, double thr) {
  std::vector<std::vector<std::size_t>> edges(preds.size());
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (iou(preds[p], gts[g]) + kIouSlack >= thr) edges[p].push_back(g);
    }
  }
  std::vector<bool> used(gts.size(), false);
  std::size_t best = 0;
  std::function<void(std::size_t, std::size_t)> search = [&](std::size_t p, std::size_t matched) {
    if (matched + (preds.size() - p) <= best) return;
    if (p == preds.size()) {
      best = std::max(best, matched);
      return;
    }
    for (std::size_t g : edges[p]) {
      if (used[g]) continue;
      used[g] = true;
      search(p + 1, matched + 1);
      used[g] = false;
    }
    search(p + 1, matched);
  };
  search(0, 0);
  return best;
}

}  // namespace

std::map<int, DetectionCounts> exhaustive_match_counts(const AnnotationSet& gt, const AnnotationSet& pred,
                                                       double iou_threshold) {
  std::map<int, DetectionCounts> out;
  std::set<std::string> ids;
  for (const auto& [id, _] : gt.images) ids.insert(id);
  for (const auto& [id, _] : pred.images) ids.insert(id);
  const auto known = [&](int cls) {
    return cls >= 0 && (gt.class_names.empty() || static_cast<std::size_t>(cls) < gt.class_names.size());
  };
  for (const auto& id : ids) {
    std::map<int, std::pair<std::vector<BBox>, std::vector<BBox>>> by_class;
    if (auto it = gt.images.find(id); it != gt.images.end()) {
      for (const auto& b : it->second) by_class[b.class_id].second.push_back(b);
    }
    if (auto it = pred.images.find(id); it != pred.images.end()) {
      for (const auto& b : it->second) by_class[b.class_id].first.push_back(b);
    }
    for (const auto& [cls, boxes] : by_class) {
      const auto& [preds, gts] = boxes;
      const std::size_t tp = known(cls) ? max_matching(preds, gts, iou_threshold) : 0;
      auto& c = out[cls];
      c.tp += tp;
      c.fp += preds.size() - tp;
      c.fn += gts.size() - tp;
    }
  }
  return out;
}

SynthDetections synth_detections(const DetectionSceneSpec& spec, std::uint64_t seed) {
  if (spec.gt_per_image < 0 || spec.gt_per_image > 16) fail(ErrorKind::usage, "gt_per_image must lie in [0, 16]");
  if (spec.missed_per_image > spec.gt_per_image) fail(ErrorKind::usage, "cannot miss more boxes than exist");
  if (spec.num_classes < 1) fail(ErrorKind::usage, "need at least one class");
  Rng rng(seed);
  SynthDetections out;
  out.gt.class_names = default_class_names();
  out.gt.class_names.resize(static_cast<std::size_t>(spec.num_classes));
  for (std::size_t i = default_class_names().size(); i < out.gt.class_names.size(); ++i) {
    out.gt.class_names[i] = "class " + std::to_string(i);
  }
  out.pred.class_names = out.gt.class_names;

  constexpr double kCell = 0.25;
  for (int img = 0; img < spec.images; ++img) {
    const std::string id = fmt::format("img_{:04d}", img);
    auto& gts = out.gt.images[id];
    auto& preds = out.pred.images[id];

    std::vector<int> cells(16);
    for (int i = 0; i < 16; ++i) cells[static_cast<std::size_t>(i)] = i;
    for (int i = 15; i > 0; --i) std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(rng.uniform_int(0, i))]);

    auto box_in_cell = [&](int cell, int cls) {
      BBox b;
      b.class_id = cls;
      b.cx = (cell % 4 + 0.5) * kCell + rng.uniform(-0.02, 0.02);
      b.cy = (cell / 4 + 0.5) * kCell + rng.uniform(-0.02, 0.02);
      b.w = rng.uniform(0.08, 0.18);
      b.h = rng.uniform(0.08, 0.18);
      return b;
    };
    for (int g = 0; g < spec.gt_per_image; ++g) {
      gts.push_back(box_in_cell(cells[static_cast<std::size_t>(g)], rng.uniform_int(0, spec.num_classes - 1)));
    }
    std::vector<std::size_t> predicted;
    for (int g = spec.missed_per_image; g < spec.gt_per_image; ++g) {
      BBox p = jittered(gts[static_cast<std::size_t>(g)], spec.jitter, rng);
      p.confidence = rng.uniform(0.3, 1.0);
      preds.push_back(p);
      predicted.push_back(static_cast<std::size_t>(g));
    }
    for (int d = 0; d < spec.duplicates_per_image && !predicted.empty(); ++d) {
      const std::size_t g = predicted[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(predicted.size()) - 1))];
      BBox p = jittered(gts[g], spec.jitter, rng);
      p.confidence = rng.uniform(0.05, 1.0);
      preds.push_back(p);
    }
    for (int f = 0; f < spec.planted_fp_per_image; ++f) {
      const int slot = spec.gt_per_image + f;
      if (slot >= 16) break;
      BBox p = box_in_cell(cells[static_cast<std::size_t>(slot)], rng.uniform_int(0, spec.num_classes - 1));
      p.confidence = rng.uniform(0.05, 1.0);
      preds.push_back(p);
    }
    for (int f = 0; f < spec.random_fp_per_image; ++f) {
      BBox p;
      p.class_id = rng.uniform_int(0, spec.num_classes - 1);
      p.w = rng.uniform(0.05, 0.3);
      p.h = rng.uniform(0.05, 0.3);
      p.cx = rng.uniform(0.5 * p.w, 1.0 - 0.5 * p.w);
      p.cy = rng.uniform(0.5 * p.h, 1.0 - 0.5 * p.h);
      p.confidence = rng.uniform(0.05, 1.0);
      preds.push_back(p);
    }
    // Shuffle prediction file order so it carries no information.
    for (std::size_t i = preds.size(); i-- > 1;) std::swap(preds[i], preds[static_cast<std::size_t>(rng.next() % (i + 1))]);
  }

  out.expected_per_class = exhaustive_match_counts(out.gt, out.pred, 0.5);
  for (const auto& [cls, c] : out.expected_per_class) {
    out.expected.tp += c.tp;
    out.expected.fp += c.fp;
    out.expected.fn += c.fn;
  }
  return out;
}

DetectionSceneSpec random_scene_spec(std::uint64_t seed) {
  Rng rng(seed ^ 0x5eedULL);
  DetectionSceneSpec s;
  s.images = 1;
  s.gt_per_image = rng.uniform_int(1, 7);
  s.missed_per_image = rng.uniform_int(0, std::min(2, s.gt_per_image));
  s.duplicates_per_image = rng.uniform_int(0, 2);
  s.planted_fp_per_image = rng.uniform_int(0, 2);
  s.random_fp_per_image = rng.uniform_int(0, 2);
  s.jitter = rng.uniform(0.0, 0.3);
  return s;
}

ordered_json detection_spec_to_json(const DetectionSceneSpec& s) {
  ordered_json doc;
  doc["images"] = s.images;
  doc["gt_per_image"] = s.gt_per_image;
  doc["jitter"] = s.jitter;
  doc["missed_per_image"] = s.missed_per_image;
  doc["planted_fp_per_image"] = s.planted_fp_per_image;
  doc["duplicates_per_image"] = s.duplicates_per_image;
  doc["random_fp_per_image"] = s.random_fp_per_image;
  doc["num_classes"] = s.num_classes;
  return doc;
}

DetectionSceneSpec detection_spec_from_json(const json& doc) {
  DetectionSceneSpec s;
  try {
    s.images = doc.value("images", s.images);
    s.gt_per_image = doc.value("gt_per_image", s.gt_per_image);
    s.jitter = doc.value("jitter", s.jitter);
    s.missed_per_image = doc.value("missed_per_image", s.missed_per_image);
    s.planted_fp_per_image = doc.value("planted_fp_per_image", s.planted_fp_per_image);
    s.duplicates_per_image = doc.value("duplicates_per_image", s.duplicates_per_image);
    s.random_fp_per_image = doc.value("random_fp_per_image", s.random_fp_per_image);
    s.num_classes = doc.value("num_classes", s.num_classes);
  } catch (const json::exception& e) {
    throw ParseError("", 0, "", std::string("invalid detection scene spec: ") + e.what());
  }
  return s;
}

}  // namespace screekit
