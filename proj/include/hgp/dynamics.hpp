#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "hgp/errors.hpp"
#include "hgp/scalar.hpp"

namespace hgp {

// Two-lane straight highway. y = 0 is the right road edge.
struct RoadGeometry {
  static constexpr double kLaneWidth = 3.7;
  static constexpr double kRightLaneCenter = 0.5 * kLaneWidth;
  static constexpr double kLeftLaneCenter = 1.5 * kLaneWidth;
  static constexpr double kMinY = 0.0;
  static constexpr double kMaxY = 2.0 * kLaneWidth;
  static constexpr double kNominalSpeed = 30.0;
};

struct VehicleLimits {
  static constexpr double kWheelbase = 2.7;
  static constexpr double kSteerMax = 0.5;
  static constexpr double kAccelMin = -8.0;
  static constexpr double kAccelMax = 4.0;
  static constexpr double kLateralSpeedMax = 2.5;
};

template <typename T>
struct VehicleStateT {
  T x{0};    // longitudinal position (m)
  T y{0};    // lateral position (m)
  T psi{0};  // heading (rad), 0 along the road
  T v{0};    // forward speed (m/s)
};

template <typename T>
struct VehicleControlT {
  T steer{0};  // rad
  T accel{0};  // m/s^2
};

template <typename T>
struct JointStateT {
  VehicleStateT<T> av;
  VehicleStateT<T> human;
  double t = 0.0;
};

using VehicleState = VehicleStateT<double>;
using VehicleControl = VehicleControlT<double>;
using JointState = JointStateT<double>;

// Simplified game states. Field order is the grid dimension order.
struct Strat3State {
  double x_rel = 0.0;
  double y_A = 0.0;
  double v_rel = 0.0;

  static constexpr int kDim = 3;
  Eigen::Vector3d vector() const { return {x_rel, y_A, v_rel}; }
  static Strat3State from(const Eigen::Vector3d& s) { return {s[0], s[1], s[2]}; }
};

struct Strat4State {
  double x_rel = 0.0;
  double y_A = 0.0;
  double y_H = 0.0;
  double v_rel = 0.0;

  static constexpr int kDim = 4;
  Eigen::Vector4d vector() const { return {x_rel, y_A, y_H, v_rel}; }
  static Strat4State from(const Eigen::Vector4d& s) {
    return {s[0], s[1], s[2], s[3]};
  }
};

struct StratActionA {
  double w_A = 0.0;  // lateral velocity (m/s)
  double a_A = 0.0;  // acceleration (m/s^2)
};

struct StratActionH {
  double a_H = 0.0;
  double w_H = 0.0;  // ignored by the 3-D model
};

// Wraps an angle into (-pi, pi].
template <typename T>
T wrap_angle(T a) {
  constexpr double kPi = std::numbers::pi;
  const double raw = value_of(a);
  if (raw > kPi || raw <= -kPi) {
    double turns = std::floor((raw + kPi) / (2.0 * kPi));
    if (raw - 2.0 * kPi * turns <= -kPi) turns -= 1.0;
    a = a - 2.0 * kPi * turns;
  }
  return a;
}

template <typename T>
T clamp_road(const T& y) {
  if (y < RoadGeometry::kMinY) return y * 0.0 + RoadGeometry::kMinY;
  if (y > RoadGeometry::kMaxY) return y * 0.0 + RoadGeometry::kMaxY;
  return y;
}

namespace detail {

// Kinematic bicycle, forward Euler. Generic in the scalar so the planner can
// propagate derivatives through a rollout.
template <typename T, typename U>
VehicleStateT<T> integrate_bicycle(const VehicleStateT<T>& s,
                                   const VehicleControlT<U>& u, double dt) {
  using std::cos;
  using std::sin;
  using std::tan;
  VehicleStateT<T> n;
  n.x = s.x + s.v * cos(s.psi) * dt;
  n.y = clamp_road(T(s.y + s.v * sin(s.psi) * dt));
  n.psi = wrap_angle(T(s.psi + s.v / VehicleLimits::kWheelbase * tan(u.steer) * dt));
  n.v = s.v + u.accel * dt;
  if (n.v < 0.0) n.v = n.v * 0.0;  // keeps derivative storage sized
  return n;
}

}  // namespace detail

bool is_finite(const VehicleState& s);
bool is_finite(const VehicleControl& u);

// One Euler step of the kinematic bicycle. Throws InvalidStateError on
// non-finite input or non-positive dt.
VehicleState step_bicycle(const VehicleState& s, const VehicleControl& u, double dt);

JointState step_joint(const JointState& x, const VehicleControl& u_A,
                      const VehicleControl& u_H, double dt);

VehicleControl clamp_control(const VehicleControl& u);

Strat3State step_strategic_3d(const Strat3State& s, const StratActionA& aA,
                              const StratActionH& aH, double dk, double alpha);
Strat4State step_strategic_4d(const Strat4State& s, const StratActionA& aA,
                              const StratActionH& aH, double dk, double alpha);

template <typename T>
T relative_speed(const VehicleStateT<T>& av, const VehicleStateT<T>& human) {
  using std::cos;
  return av.v * cos(av.psi) - human.v * cos(human.psi);
}

Strat3State project_3d(const JointState& x);
Strat4State project_4d(const JointState& x);

}  // namespace hgp
