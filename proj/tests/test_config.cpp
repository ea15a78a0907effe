#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <string>

#include "phihilfer/config.hpp"

using namespace phihilfer;

namespace {

const std::string kSource = PHIHILFER_SOURCE_DIR;

Json minimal() {
  return Json::parse(R"({"order": {"rho": 0.5, "nu": 1}, "interval": {"a": 0, "T": 1}, "u_a": 1, "rhs": "-u"})");
}

}  // namespace

TEST(Config, ExampleDocument) {
  const auto cfg = load_config(kSource + "/configs/example.json");
  const auto& p = cfg.problem;
  EXPECT_DOUBLE_EQ(p.order.rho(), 0.7);
  EXPECT_DOUBLE_EQ(p.order.nu(), 0.5);
  EXPECT_EQ(p.phi.kind(), PhiKind::identity);
  EXPECT_EQ(p.impulse_count(), 1u);
  EXPECT_DOUBLE_EQ(p.impulse_times[0], 0.5);
  EXPECT_EQ(cfg.solver.nodes_per_subinterval, 256);
  for (double t : {0.1, 0.4, 0.9}) {
    for (double u : {-1.5, 0.0, 2.0}) {
      const double f = std::pow(t, 0.15) / (1 + std::fabs(u)) + 3 * std::pow(std::sin(t), 2);
      EXPECT_NEAR(p.rhs(t, u), f, 1e-14);
    }
  }
  EXPECT_NEAR(p.impulse_maps[0](2.0), std::pow(0.5, 0.15) * 2.0 / 3.0, 1e-15);
  ASSERT_TRUE(cfg.uh && cfg.uhr && cfg.ic && cfg.data && cfg.order);
  EXPECT_EQ(cfg.uh->spec.mode, PerturbationMode::uh);
  EXPECT_DOUBLE_EQ(cfg.uh->spec.epsilon, 0.01);
  EXPECT_EQ(cfg.uhr->spec.mode, PerturbationMode::uhr_scaled);
  EXPECT_DOUBLE_EQ(cfg.ic->v_a, 1.1);
  EXPECT_DOUBLE_EQ(cfg.order->delta, 0.05);
  EXPECT_NEAR(cfg.data->perturbed.rhs(0.3, 1.0) - p.rhs(0.3, 1.0), 0.05, 1e-15);
  EXPECT_NEAR(cfg.data->perturbed.impulse_maps[0](1.0) - p.impulse_maps[0](1.0), 0.02, 1e-15);
  EXPECT_EQ(cfg.bound_scale, 1.0);
}

TEST(Config, PhiKinds) {
  auto d = minimal();
  d["phi"] = {{"kind", "log"}};
  d["interval"] = {{"a", 1}, {"T", 2}};
  EXPECT_EQ(parse_config(d).problem.phi.kind(), PhiKind::logarithm);
  d["phi"] = {{"kind", "power"}, {"p", 2}};
  EXPECT_DOUBLE_EQ(parse_config(d).problem.phi.eval(1.5), 2.25);
  d["phi"] = {{"kind", "expr"}, {"phi", "t^3"}, {"dphi", "3*t^2"}};
  EXPECT_DOUBLE_EQ(parse_config(d).problem.phi.deriv(1.0), 3.0);
  d["phi"] = {{"kind", "spline"}};
  EXPECT_THROW(parse_config(d), ConfigError);
  d["phi"] = {{"kind", "power"}, {"p", -1}};
  EXPECT_THROW(parse_config(d), ConfigError);
}

TEST(Config, SchemaErrors) {
  EXPECT_THROW(parse_config_text("{not json"), ConfigError);
  EXPECT_THROW(parse_config_text("[1, 2]"), ConfigError);
  for (const char* key : {"order", "interval", "u_a", "rhs"}) {
    auto d = minimal();
    d.erase(key);
    EXPECT_THROW(parse_config(d), ConfigError) << key;
  }
  auto d = minimal();
  d["u_a"] = "one";
  EXPECT_THROW(parse_config(d), ConfigError);
  d = minimal();
  d["order"]["rho"] = 1.0;
  EXPECT_THROW(parse_config(d), ConfigError);
  d = minimal();
  d["interval"] = {{"a", 1}, {"T", 1}};
  EXPECT_THROW(parse_config(d), ConfigError);
  d = minimal();
  d["impulses"] = Json::array({{{"t", 1.0}, {"map", "u"}}});
  EXPECT_THROW(parse_config(d), ConfigError);
  d = minimal();
  d["solver"] = {{"nodes_per_subinterval", 4}};
  EXPECT_THROW(parse_config(d), ConfigError);
  d = minimal();
  d["solver"] = {{"nodes_per_subinterval", 12.5}};
  EXPECT_THROW(parse_config(d), ConfigError);
  d = minimal();
  d["perturbations"] = {{"wiggle", Json::object()}};
  EXPECT_THROW(parse_config(d), ConfigError);
  d = minimal();
  d["perturbations"] = {{"order", {{"delta", 0.7}}}};
  EXPECT_THROW(parse_config(d), ConfigError);
  d = minimal();
  d["perturbations"] = {{"uh", {{"epsilon", 0.1}, {"waveform", {{"kind", "constant"}, {"level", 2}}}}}};
  EXPECT_THROW(parse_config(d), ConfigError);
  d = minimal();
  d["oracle"] = {{"kind", "linear"}};
  EXPECT_THROW(parse_config(d), ConfigError);
}

TEST(Config, ExpressionErrorsAreValidationErrors) {
  auto d = minimal();
  d["rhs"] = "u +* 2";
  EXPECT_THROW(parse_config(d), ExpressionConfigError);
  d = minimal();
  d["rhs"] = "x + u";
  EXPECT_THROW(parse_config(d), ValidationError);
  d = minimal();
  d["impulses"] = Json::array({{{"t", 0.5}, {"map", "t*u"}}});
  EXPECT_THROW(parse_config(d), ExpressionConfigError);
  d = minimal();
  d["phi"] = {{"kind", "expr"}, {"phi", "phi(t)"}};
  EXPECT_THROW(parse_config(d), ExpressionConfigError);
}

TEST(Config, UnreadableFileIsIoError) {
  EXPECT_THROW(load_config(kSource + "/tests/fixtures/does_not_exist.json"), IoError);
}

TEST(Config, PerturbationBlocks) {
  auto d = minimal();
  d["perturbations"] = {
      {"uhr", {{"variant", "pair"}, {"theta", "exp(t)"}, {"chi", 0.5}, {"waveform", {{"kind", "random"}, {"pieces", 4}}}}},
      {"data", {{"rhs", "-u + 0.1"}, {"u_a", 1.2}}}};
  const auto cfg = parse_config(d);
  EXPECT_EQ(cfg.uhr->spec.mode, PerturbationMode::uhr_pair);
  EXPECT_EQ(cfg.uhr->spec.epsilon, 1.0);
  EXPECT_EQ(cfg.uhr->spec.chi, 0.5);
  EXPECT_EQ(cfg.uhr->spec.waveform.kind(), WaveformKind::random_steps);
  EXPECT_DOUBLE_EQ(cfg.data->perturbed.u_a, 1.2);
  EXPECT_NEAR(cfg.data->perturbed.rhs(0.2, 1.0), -0.9, 1e-15);
}

TEST(Config, RandomWaveformSeedHonoursEnvironment) {
  auto d = minimal();
  d["perturbations"] = {{"uh", {{"epsilon", 0.1}, {"waveform", {{"kind", "random"}, {"pieces", 8}, {"seed", 7}}}}}};
  auto sample = [&] {
    const auto cfg = parse_config(d);
    const auto& w = cfg.uh->spec.waveform;
    const auto& p = cfg.problem;
    std::vector<double> v;
    for (double t : {0.05, 0.3, 0.55, 0.8}) v.push_back(w.eval(t, p.phi, p.a, p.T));
    return v;
  };
  ::unsetenv("PHI_HILFER_SEED");
  const auto base = sample();
  EXPECT_EQ(sample(), base);
  ::setenv("PHI_HILFER_SEED", "99", 1);
  const auto overridden = sample();
  ::unsetenv("PHI_HILFER_SEED");
  EXPECT_NE(overridden, base);
}

TEST(Config, ProblemRoundTripsThroughJson) {
  for (const char* name : {"example", "homogeneous", "linear_caputo", "hadamard_power"}) {
    const auto cfg = load_config(kSource + "/configs/" + std::string(name) + ".json");
    const Json once = problem_to_json(cfg.problem);
    const Json twice = problem_to_json(parse_config(once).problem);
    EXPECT_EQ(once, twice) << name;
    const auto q = parse_config(once).problem;
    for (double t : {0.3, 0.6}) {
      const double tt = cfg.problem.a + t * (cfg.problem.T - cfg.problem.a);
      EXPECT_DOUBLE_EQ(q.rhs(tt, 0.7), cfg.problem.rhs(tt, 0.7)) << name;
    }
  }
}
