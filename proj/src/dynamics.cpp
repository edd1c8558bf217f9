#include "hgp/dynamics.hpp"

#include <algorithm>
#include <string>

namespace hgp {

bool is_finite(const VehicleState& s) {
  return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.psi) &&
         std::isfinite(s.v);
}

bool is_finite(const VehicleControl& u) {
  return std::isfinite(u.steer) && std::isfinite(u.accel);
}

VehicleState step_bicycle(const VehicleState& s, const VehicleControl& u,
                          double dt) {
  if (!(dt > 0.0)) throw InvalidStateError("step_bicycle: dt must be positive");
  if (!is_finite(s)) throw InvalidStateError("step_bicycle: non-finite state");
  if (!is_finite(u)) throw InvalidStateError("step_bicycle: non-finite control");
  return detail::integrate_bicycle(s, u, dt);
}

JointState step_joint(const JointState& x, const VehicleControl& u_A,
                      const VehicleControl& u_H, double dt) {
  JointState n;
  n.av = step_bicycle(x.av, u_A, dt);
  n.human = step_bicycle(x.human, u_H, dt);
  n.t = x.t + dt;
  return n;
}

VehicleControl clamp_control(const VehicleControl& u) {
  return {std::clamp(u.steer, -VehicleLimits::kSteerMax, VehicleLimits::kSteerMax),
          std::clamp(u.accel, VehicleLimits::kAccelMin, VehicleLimits::kAccelMax)};
}

namespace {

void require_strategic(bool finite, double dk, const char* who) {
  if (!(dk > 0.0)) throw InvalidStateError(std::string(who) + ": dk must be positive");
  if (!finite) throw InvalidStateError(std::string(who) + ": non-finite input");
}

}  // namespace

Strat3State step_strategic_3d(const Strat3State& s, const StratActionA& aA,
                              const StratActionH& aH, double dk, double alpha) {
  require_strategic(s.vector().allFinite() && std::isfinite(aA.w_A) &&
                        std::isfinite(aA.a_A) && std::isfinite(aH.a_H) &&
                        std::isfinite(alpha),
                    dk, "step_strategic_3d");
  Strat3State n;
  n.x_rel = s.x_rel + s.v_rel * dk;
  n.y_A = clamp_road(s.y_A + aA.w_A * dk);
  n.v_rel = s.v_rel + (aA.a_A - aH.a_H - alpha * s.v_rel) * dk;
  return n;
}

Strat4State step_strategic_4d(const Strat4State& s, const StratActionA& aA,
                              const StratActionH& aH, double dk, double alpha) {
  require_strategic(s.vector().allFinite() && std::isfinite(aA.w_A) &&
                        std::isfinite(aA.a_A) && std::isfinite(aH.a_H) &&
                        std::isfinite(aH.w_H) && std::isfinite(alpha),
                    dk, "step_strategic_4d");
  Strat4State n;
  n.x_rel = s.x_rel + s.v_rel * dk;
  n.y_A = clamp_road(s.y_A + aA.w_A * dk);
  n.y_H = clamp_road(s.y_H + aH.w_H * dk);
  n.v_rel = s.v_rel + (aA.a_A - aH.a_H - alpha * s.v_rel) * dk;
  return n;
}

Strat3State project_3d(const JointState& x) {
  return {x.av.x - x.human.x, x.av.y, relative_speed(x.av, x.human)};
}

Strat4State project_4d(const JointState& x) {
  return {x.av.x - x.human.x, x.av.y, x.human.y, relative_speed(x.av, x.human)};
}

}  // namespace hgp
