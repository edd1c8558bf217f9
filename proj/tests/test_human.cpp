#include <cmath>
#include <random>

#include "doctest.h"
#include "hgp/errors.hpp"
#include "hgp/human_models.hpp"
#include "hgp/sim_harness.hpp"

using namespace hgp;

TEST_SUITE("human") {

TEST_CASE("constant-speed human at its setpoint does nothing") {
  HumanModelConfig cfg;
  cfg.kind = HumanKind::kConstantSpeed;
  cfg.constant_speed = 24.0;
  HumanModel h(cfg);
  JointState x;
  x.human = {0, RoadGeometry::kLeftLaneCenter, 0, 24};
  x.av = {-20, RoadGeometry::kLeftLaneCenter, 0, 35};
  const VehicleControl u = h.act(x, ControlSequence::Zero(2, cfg.preview_steps()));
  CHECK(std::abs(u.accel) < 0.05);
  CHECK(std::abs(u.steer) < 0.01);
}

TEST_CASE("constant-speed human holds its lane and speed") {
  HumanModelConfig cfg;
  cfg.kind = HumanKind::kConstantSpeed;
  HumanModel h(cfg);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double lane : {RoadGeometry::kRightLaneCenter, RoadGeometry::kLeftLaneCenter}) {
    JointState x;
    x.human = {0, lane + 0.15 * u(rng), 0.02 * u(rng), 24 + 6 * u(rng)};
    x.av = {-10, 1.85, 0, 30};
    for (int i = 0; i < 150; ++i) {
      const VehicleControl c = h.act(x, ControlSequence::Zero(2, cfg.preview_steps()));
      x = step_joint(x, {0, 0}, c, 0.1);
      REQUIRE(std::abs(x.human.y - lane) < 0.2);
    }
    CHECK(x.human.v == doctest::Approx(24.0).epsilon(1e-3));
  }
}

TEST_CASE("lone human ignores the AV plan") {
  HumanModelConfig cfg;
  HumanModel a(cfg), b(cfg);
  JointState x;
  x.human = {0, RoadGeometry::kLeftLaneCenter, 0, 27};
  x.av = {500, RoadGeometry::kRightLaneCenter, 0, 30};
  ControlSequence wild = ControlSequence::Zero(2, cfg.preview_steps());
  wild.row(0).setConstant(0.3);
  wild.row(1).setConstant(-8.0);
  const VehicleControl ua = a.act(x, ControlSequence::Zero(2, cfg.preview_steps()));
  const VehicleControl ub = b.act(x, wild);
  CHECK(ua.accel == doctest::Approx(ub.accel).epsilon(1e-9));
  CHECK(ua.steer == doctest::Approx(ub.steer).epsilon(1e-9));

  // Same answer as optimizing the human alone.
  MoverModel m;
  m.rewards = cfg.rewards;
  const ControlSequence z = ControlSequence::Zero(2, cfg.preview_steps());
  const OptimizeResult solo = optimize_own(x, z, Player::kH, m, cfg.dt, z, cfg.optimizer);
  CHECK(ua.accel == doctest::Approx(solo.controls(1, 0)).epsilon(1e-9));
  CHECK(ua.steer == doctest::Approx(solo.controls(0, 0)).epsilon(1e-9));
  // Below her target speed she speeds up.
  CHECK(ua.accel > 0.0);
}

TEST_CASE("human configuration errors") {
  HumanModelConfig cfg;
  cfg.preview = 0.25;
  CHECK_THROWS_AS(HumanModel{cfg}, ConfigError);
  cfg.preview = 0.0;
  CHECK_THROWS_AS(HumanModel{cfg}, ConfigError);
  cfg = HumanModelConfig{};
  cfg.kind = HumanKind::kConstantSpeed;
  cfg.constant_speed = -1.0;
  CHECK_THROWS_AS(HumanModel{cfg}, ConfigError);
  HumanModel h(HumanModelConfig{});
  CHECK_THROWS_AS(h.act(JointState{}, ControlSequence::Zero(2, 3)), DimensionError);
  CHECK_THROWS_AS(human_kind_from_string("robot"), ConfigError);
  CHECK(human_kind_from_string("constant_speed") == HumanKind::kConstantSpeed);
}

}  // TEST_SUITE
