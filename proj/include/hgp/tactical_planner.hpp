#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "hgp/dynamics.hpp"
#include "hgp/reward.hpp"
#include "hgp/value_table.hpp"

namespace hgp {

// Control sequence, one column per time step: row 0 steer, row 1 accel.
using ControlSequence = Eigen::Matrix2Xd;

struct Trajectory {
  std::vector<JointState> states;  // M + 1 states
  ControlSequence controls_A;
  ControlSequence controls_H;
  double dt = 0.1;
};

Trajectory rollout(const JointState& x0, const ControlSequence& uA,
                   const ControlSequence& uH, double dt);

enum class GradientMode { kAutoDiff, kFiniteDifference };

struct OptimizerOptions {
  int max_iterations = 50;
  double gradient_tolerance = 1e-4;  // max-norm of the projected gradient
  double step_tolerance = 1e-6;
  GradientMode gradient = GradientMode::kAutoDiff;
  double fd_step = 1e-5;
};

// What one player optimizes: its rewards plus an optional strategic terminal
// value. The value table is used when present and `use_value` is set.
struct MoverModel {
  RewardConfig rewards;
  std::shared_ptr<const ValueTable> value;
  int value_stage = 0;
  // Weight on the terminal value term.
  double value_weight = 1.0;
};

struct PlannerConfig {
  int M = 5;
  double dt = 0.1;
  int max_rounds = 10;
  double round_tolerance = 1e-3;
  OptimizerOptions inner;
  bool influence_term = false;
  bool use_value = true;
  RewardConfig rewards;
  std::shared_ptr<const ValueTable> av_value;
  std::shared_ptr<const ValueTable> human_value;
  int value_stage = 0;
  double value_weight = 1.0;

  void validate() const;
  MoverModel mover(Player who) const;
};

// Mover's return over the horizon: sum of its per-step rewards for t < M plus
// the strategic value at the projected terminal state when a table is given.
double objective(const JointState& x0, const ControlSequence& uA,
                 const ControlSequence& uH, Player who, const MoverModel& model,
                 double dt);

// Gradient of objective() with respect to the mover's controls, flattened
// column-major ([steer_0, accel_0, steer_1, ...]).
Eigen::VectorXd objective_gradient(const JointState& x0, const ControlSequence& uA,
                                   const ControlSequence& uH, Player who,
                                   const MoverModel& model, double dt,
                                   GradientMode mode = GradientMode::kAutoDiff,
                                   double fd_step = 1e-5);

struct OptimizeResult {
  ControlSequence controls;
  double objective = 0.0;
  double initial_objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Maximizes a function of a flattened control sequence over the box control
// limits with projected BFGS. `value` returns the objective; `gradient` its
// gradient. Used directly by tests with hand-built objectives.
struct BoxObjective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
};
OptimizeResult maximize_controls(const BoxObjective& f, const ControlSequence& init,
                                 const OptimizerOptions& options);

// Local best response of `who` to the other player's fixed controls.
OptimizeResult optimize_own(const JointState& x0, const ControlSequence& fixed_other,
                            Player who, const MoverModel& model, double dt,
                            const ControlSequence& init, const OptimizerOptions& options);

struct PlanResult {
  ControlSequence controls_A;
  ControlSequence controls_H;
  double objective = 0.0;
  int rounds = 0;
  bool converged = false;
  // plan_with_influence fell back to plain best response (singular Hessian).
  bool influence_fallback = false;
};

// Sensitivity of the human's locally optimal controls to the AV's controls,
// by implicit differentiation of her first-order condition. Returns nullopt
// when her Hessian is singular or not negative definite on free controls.
std::optional<Eigen::MatrixXd> human_response_jacobian(const JointState& x0,
                                                       const ControlSequence& uA,
                                                       const ControlSequence& uH,
                                                       const MoverModel& human,
                                                       double dt, double fd_step = 1e-4);

// Receding-horizon planner with warm start. Not thread-safe; one per episode.
class TacticalPlanner {
 public:
  explicit TacticalPlanner(PlannerConfig cfg);

  const PlannerConfig& config() const { return cfg_; }

  // Iterated local best response from the warm start.
  PlanResult plan(const JointState& x0);

  // As plan(), with the influence term in the AV's gradient.
  PlanResult plan_with_influence(const JointState& x0);

  // plan() once per pair of initializations, keeping the best AV objective.
  PlanResult plan_multistart(const JointState& x0,
                             const std::vector<ControlSequence>& av_inits,
                             const std::vector<ControlSequence>& human_inits);

  // Drops the warm start.
  void reset();

  void set_warm_start(const ControlSequence& uA, const ControlSequence& uH);

 private:
  PlanResult best_response(const JointState& x0, bool influence);
  void shift_warm_start(const PlanResult& r);

  PlannerConfig cfg_;
  ControlSequence warm_A_;
  ControlSequence warm_H_;
};

// Full-left steer, full-right steer, and straight (zero acceleration holds
// speed in the bicycle model) sequences of length M.
std::vector<ControlSequence> diverse_initializations(int M);

// Multi-start plan with the standard diverse initializations for both cars.
PlanResult plan_long_horizon(TacticalPlanner& planner, const JointState& x0);

}  // namespace hgp
