#pragma once

#include <memory>

#include "hgp/tactical_planner.hpp"

namespace hgp {

enum class HumanKind { kOptimizer, kConstantSpeed };

std::string to_string(HumanKind kind);
HumanKind human_kind_from_string(const std::string& name);

struct HumanModelConfig {
  HumanKind kind = HumanKind::kOptimizer;
  double constant_speed = 24.0;
  RewardConfig rewards;
  double preview = 0.5;  // s of AV trajectory the human anticipates
  double dt = 0.1;
  std::shared_ptr<const ValueTable> value;  // her strategic value, optional
  int value_stage = 0;
  OptimizerOptions optimizer;

  // Throws ConfigError unless preview is a positive multiple of dt.
  void validate() const;
  int preview_steps() const;
};

// Simulated human driver. Holds a warm start across calls; one per episode.
class HumanModel {
 public:
  explicit HumanModel(HumanModelConfig cfg);

  const HumanModelConfig& config() const { return cfg_; }

  // Control for the current step given the AV controls the human anticipates
  // (preview_steps() columns).
  VehicleControl act(const JointState& x, const ControlSequence& av_committed);

  void reset();

 private:
  VehicleControl act_constant(const JointState& x) const;

  HumanModelConfig cfg_;
  ControlSequence warm_;
};

}  // namespace hgp
