#include <cmath>
#include <random>
#include <sstream>

#include <doctest.h>

#include "screekit/contact.hpp"
#include "screekit/error.hpp"
#include "screekit/synth.hpp"
#include "test_util.hpp"

using namespace screekit;

namespace {

TelemetrySample random_pose(std::mt19937& gen) {
  std::uniform_real_distribution<double> haa(-0.4, 0.4), hfe(-0.9, 0.9), kfe(-2.3, -0.4);
  TelemetrySample s;
  s.base_orientation = quaternion_from_rpy(haa(gen), haa(gen), 3.0 * haa(gen));
  for (Eigen::Index j = 0; j < 12; j += 3) {
    s.joint_pos[j] = haa(gen);
    s.joint_pos[j + 1] = hfe(gen);
    s.joint_pos[j + 2] = kfe(gen);
  }
  return s;
}

// Plain logistic log-likelihood, written independently of the fitter.
double log_likelihood(const std::vector<LabeledForceSample>& data, double b0, double b1) {
  double ll = 0.0;
  for (const auto& s : data) {
    const double p = 1.0 / (1.0 + std::exp(-(b0 + b1 * s.f_vertical)));
    ll += s.label ? std::log(p) : std::log(1.0 - p);
  }
  return ll;
}

std::vector<LabeledForceSample> draw(std::uint64_t seed, int n, double b0, double b1) {
  Rng rng(seed);
  std::vector<LabeledForceSample> out;
  for (int i = 0; i < n; ++i) {
    const double f = rng.uniform(0.0, 150.0);
    const double p = 1.0 / (1.0 + std::exp(-(b0 + b1 * f)));
    out.push_back({f, rng.uniform() < p ? 1 : 0});
  }
  return out;
}

}  // namespace

TEST_SUITE("contact") {
  TEST_CASE("sigmoid values and numerical stability") {
    const ContactClassifier c;
    CHECK(contact_probability(c, 50.0) == doctest::Approx(0.5));
    CHECK(contact_probability(c, 0.0) == doctest::Approx(1.0 / (1.0 + std::exp(3.0))));
    CHECK(contact_probability(c, 1e6) == 1.0);
    CHECK(contact_probability(c, -1e6) == 0.0);
    CHECK(std::isfinite(contact_probability(c, -1e300)));
    CHECK_THROWS_AS(ContactClassifier({0.0, -1.0}).validate(), Error);
  }

  TEST_CASE("quasi-static estimate inverts synthesized torques") {
    const QuadrupedModel m;
    std::mt19937 gen(42);
    std::uniform_real_distribution<double> fx(-60.0, 60.0), fz(0.0, 300.0);
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
      TelemetrySample s = random_pose(gen);
      std::array<Eigen::Vector3d, 4> truth;
      for (Leg leg : kAllLegs) {
        const auto k = static_cast<std::size_t>(leg_index(leg));
        truth[k] = Eigen::Vector3d(fx(gen), fx(gen), fz(gen));
        s.joint_torque.segment<3>(3 * leg_index(leg)) = torques_from_force(m, s, leg, truth[k]);
      }
      const auto est = estimate_contact_forces(m, s);
      for (std::size_t k = 0; k < 4; ++k) {
        REQUIRE(est.feet[k].valid);
        CHECK((est.feet[k].force - truth[k]).norm() <= 1e-9 * truth[k].norm());
        ++checked;
      }
    }
    CHECK(checked == 4000);
  }

  TEST_CASE("singular legs are flagged, not solved") {
    const QuadrupedModel m;
    TelemetrySample s;
    s.joint_pos.segment<3>(0) = Eigen::Vector3d(0.0, 0.2, 0.0);  // straight knee
    s.joint_pos.segment<3>(3) = Eigen::Vector3d(0.0, 0.2, -1.0);
    s.joint_torque.setConstant(5.0);
    for (auto method : {ForceMethod::quasi_static, ForceMethod::full_id}) {
      const auto est = estimate_contact_forces(m, s, method);
      CHECK_FALSE(est.feet[0].valid);
      CHECK(est.feet[0].diagnostic.find("singular") != std::string::npos);
      CHECK(est.feet[0].force == Eigen::Vector3d::Zero());
      CHECK(est.feet[1].valid);
    }
  }

  TEST_CASE("full inverse dynamics recovers balanced standing forces") {
    const QuadrupedModel m;
    // Standing pose from the generator, all four feet loaded.
    GaitScenario sc = standing_scenario(0.2, 1, 0.0);
    sc.torque_noise = 0.0;
    const auto fixture = synth_telemetry(sc, m);
    const auto& s = fixture.log.samples.front();
    const auto est = estimate_contact_forces(m, s, ForceMethod::full_id);
    const auto qs = estimate_contact_forces(m, s, ForceMethod::quasi_static);
    double total = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK((est.feet[k].force - qs.feet[k].force).norm() < 1e-6);
      CHECK(est.feet[k].f_vertical == doctest::Approx(fixture.sidecar.f_vertical[k].front()).epsilon(1e-9));
      total += est.feet[k].f_vertical;
    }
    CHECK(total == doctest::Approx(m.base_mass * m.gravity));
  }

  TEST_CASE("fit matches a brute-force likelihood search") {
    // Symmetric data: the optimum has beta0 = -beta1 * 50.
    std::vector<LabeledForceSample> data;
    for (int i = 0; i <= 100; ++i) {
      const double f = i;
      const int label = (i > 50) ? (i % 7 == 0 ? 0 : 1) : (i % 7 == 3 ? 1 : 0);
      data.push_back({f, label});
    }
    const ContactClassifier fit = fit_classifier(data);
    double best = -INFINITY, best_b0 = 0.0, best_b1 = 0.0;
    for (double b1 = 0.01; b1 <= 0.3; b1 += 0.0005) {
      for (double b0 = -15.0; b0 <= 0.0; b0 += 0.01) {
        const double ll = log_likelihood(data, b0, b1);
        if (ll > best) best = ll, best_b0 = b0, best_b1 = b1;
      }
    }
    CHECK(fit.beta1 == doctest::Approx(best_b1).epsilon(0.01));
    CHECK(fit.beta0 == doctest::Approx(best_b0).epsilon(0.01));
    CHECK(log_likelihood(data, fit.beta0, fit.beta1) >= best - 1e-9);
  }

  TEST_CASE("fit recovers the generating classifier") {
    const auto train = draw(101, 10000, -3.0, 0.06);
    const ContactClassifier fit = fit_classifier(train);
    CHECK(fit.beta1 == doctest::Approx(0.06).epsilon(0.15));
    const auto fresh = draw(202, 10000, -3.0, 0.06);
    int agree = 0;
    for (const auto& s : fresh) {
      const bool a = contact_probability(fit, s.f_vertical) >= 0.5;
      const bool b = contact_probability(ContactClassifier{}, s.f_vertical) >= 0.5;
      agree += (a == b) ? 1 : 0;
    }
    CHECK(agree >= 9900);
  }

  TEST_CASE("separable data is rejected unless regularized") {
    std::vector<LabeledForceSample> data;
    for (int i = 0; i < 20; ++i) data.push_back({static_cast<double>(i), i >= 10 ? 1 : 0});
    CHECK_THROWS_WITH_AS(fit_classifier(data), doctest::Contains("--l2"), Error);
    const ContactClassifier c = fit_classifier(data, {.l2 = 0.01});
    CHECK(c.beta1 > 0.0);
    CHECK(contact_probability(c, 14.0) > 0.5);
    CHECK(contact_probability(c, 5.0) < 0.5);
  }

  TEST_CASE("degenerate training data") {
    std::vector<LabeledForceSample> ones(20, {10.0, 1});
    CHECK_THROWS_WITH_AS(fit_classifier(ones), doctest::Contains("degenerate"), Error);
    CHECK_THROWS_AS(fit_classifier(std::vector<LabeledForceSample>(3, {1.0, 0})), Error);
  }

  TEST_CASE("training file round trip and errors") {
    const auto data = draw(5, 50, -3.0, 0.06);
    std::stringstream buf;
    write_training_data(buf, data);
    const auto back = parse_training_data(buf);
    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(back[i].f_vertical == data[i].f_vertical);
      CHECK(back[i].label == data[i].label);
    }
    std::stringstream bad("# c\n12.5 1\n13 2\n");
    try {
      parse_training_data(bad, "train.txt");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }

  TEST_CASE("classifier document round trip") {
    const auto dir = test_util::scratch("classifier");
    save_classifier(dir / "c.json", {-2.5, 0.07});
    const ContactClassifier c = load_classifier(dir / "c.json");
    CHECK(c.beta0 == -2.5);
    CHECK(c.beta1 == 0.07);
  }

  TEST_CASE("schmitt trigger") {
    const std::vector<double> p = {0.2, 0.52, 0.56, 0.5, 0.46, 0.44, 0.54, 0.9};
    CHECK(schmitt_trigger(p, 0.5, 0.1) == std::vector<int>{0, 0, 1, 1, 1, 0, 0, 1});
    CHECK(schmitt_trigger(p, 0.5, 0.0) == std::vector<int>{0, 1, 1, 0, 0, 0, 1, 1});
    // Inside the dead band the initial state is kept.
    CHECK(schmitt_trigger(std::vector<double>(6, 0.5), 0.5, 0.1) == std::vector<int>(6, 1));
    CHECK(schmitt_trigger(std::vector<double>{0.54, 0.56, 0.54, 0.56, 0.54}, 0.5, 0.1) == std::vector<int>(5, 1));
    CHECK(schmitt_trigger(std::vector<double>{0.46, 0.44, 0.46, 0.44}, 0.5, 0.1) == std::vector<int>(4, 0));
    CHECK(schmitt_trigger(std::vector<double>{0.5}, 0.5, 0.1) == std::vector<int>{1});
  }
}
