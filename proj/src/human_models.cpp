#include "hgp/human_models.hpp"

#include <algorithm>
#include <cmath>

#include "hgp/errors.hpp"

namespace hgp {

std::string to_string(HumanKind kind) {
  return kind == HumanKind::kOptimizer ? "optimizer" : "constant_speed";
}

HumanKind human_kind_from_string(const std::string& name) {
  if (name == "optimizer") return HumanKind::kOptimizer;
  if (name == "constant_speed") return HumanKind::kConstantSpeed;
  throw ConfigError("human.kind: expected optimizer or constant_speed, got '" + name + "'");
}

void HumanModelConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("human.dt must be > 0");
  const double steps = preview / dt;
  if (!(preview > 0.0) || std::abs(steps - std::round(steps)) > 1e-9) {
    throw ConfigError("human.preview must be a positive multiple of dt");
  }
  if (kind == HumanKind::kConstantSpeed && !(constant_speed >= 0.0)) {
    throw ConfigError("human.constant_speed must be >= 0");
  }
  rewards.validate();
}

int HumanModelConfig::preview_steps() const {
  return static_cast<int>(std::lround(preview / dt));
}

HumanModel::HumanModel(HumanModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  reset();
}

void HumanModel::reset() { warm_ = ControlSequence::Zero(2, cfg_.preview_steps()); }

VehicleControl HumanModel::act_constant(const JointState& x) const {
  constexpr double kSpeedGain = 1.0;     // 1/s
  constexpr double kLateralGain = 0.5;   // 1/s
  constexpr double kHeadingGain = 2.0;   // 1/s
  const VehicleState& h = x.human;
  const double lane = h.y < RoadGeometry::kLaneWidth ? RoadGeometry::kRightLaneCenter
                                                     : RoadGeometry::kLeftLaneCenter;
  const double accel = kSpeedGain * (cfg_.constant_speed - h.v);
  double steer = 0.0;
  if (h.v > 0.1) {
    const double lateral_rate = std::clamp(-kLateralGain * (h.y - lane), -0.5 * h.v, 0.5 * h.v);
    const double heading_ref = std::asin(lateral_rate / h.v);
    const double yaw_rate = kHeadingGain * (heading_ref - h.psi);
    steer = std::atan(VehicleLimits::kWheelbase * yaw_rate / h.v);
  }
  return clamp_control({steer, accel});
}

VehicleControl HumanModel::act(const JointState& x, const ControlSequence& av_committed) {
  if (av_committed.cols() != cfg_.preview_steps()) {
    throw DimensionError("human: expected " + std::to_string(cfg_.preview_steps()) +
                         " anticipated AV controls, got " +
                         std::to_string(av_committed.cols()));
  }
  if (cfg_.kind == HumanKind::kConstantSpeed) return act_constant(x);

  MoverModel model;
  model.rewards = cfg_.rewards;
  model.value = cfg_.value;
  model.value_stage = cfg_.value_stage;
  const OptimizeResult r =
      optimize_own(x, av_committed, Player::kH, model, cfg_.dt, warm_, cfg_.optimizer);
  const Eigen::Index n = r.controls.cols();
  warm_.setZero();
  if (n > 1) warm_.leftCols(n - 1) = r.controls.rightCols(n - 1);
  return {r.controls(0, 0), r.controls(1, 0)};
}

}  // namespace hgp
