#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "hgp/dynamics.hpp"

namespace hgp {

struct RewardWeights {
  double collision_avoidance = -100.0;
  double lane_center = 3.0;
  // Close to the level where the right-lane center stops being a local
  // optimum for a lone car; merges are sensitive to it.
  double left_lane_preference = 13.3;
  double target_speed = 0.05;
  double ahead_of_other = 16.0;
  double control_effort = 0.02;
  double road_bounds = 20.0;

  bool operator==(const RewardWeights&) const = default;
};

// Weights and shapes shared by the tactical and strategic reward families.
// One config describes both players; the human uses her own target speed and
// carries no ahead-of-other term.
struct RewardConfig {
  RewardWeights weights;
  double target_speed_av = 35.0;
  double target_speed_human = 30.0;
  double collision_sigma_x = 6.0;  // m
  double collision_sigma_y = 2.0;  // m
  double ahead_scale = 5.0;        // m
  double left_lane_scale = 1.0;    // m
  double heading_scale = 0.1;      // rad
  double steer_effort_scale = 0.1;     // rad
  double lateral_effort_scale = 1.0;   // m/s
  double road_margin = 0.9;            // half vehicle width, m
  double nominal_human_speed = RoadGeometry::kNominalSpeed;
  // Strategic rewards are per 0.5 s stage; this sets their weight against the
  // per-step tactical rewards.
  double strategic_scale = 2.0;

  // Multiplies every feature weight by c.
  RewardConfig scaled(double c) const;

  // Throws ConfigError naming the offending field.
  void validate() const;

  // Canonical "key = value" text, one line per field.
  std::string to_text() const;
  static RewardConfig from_text(const std::string& text);

  void save(const std::filesystem::path& path) const;
  static RewardConfig load(const std::filesystem::path& path);

  // SHA-256 of to_text().
  std::array<std::uint8_t, 32> hash() const;

  bool operator==(const RewardConfig&) const = default;
};

namespace features {

template <typename T>
T sigmoid(const T& z) {
  using std::exp;
  return 1.0 / (1.0 + exp(-z));
}

template <typename T>
T collision(const T& dx, const T& dy, const RewardConfig& cfg) {
  using std::exp;
  const T zx = dx / cfg.collision_sigma_x;
  const T zy = dy / cfg.collision_sigma_y;
  return exp(-(zx * zx) - zy * zy);
}

// 1 at either lane center, 0 on the lane divider and road edges.
template <typename T>
T lane_center(const T& y) {
  using std::cos;
  constexpr double kOmega = 2.0 * 3.14159265358979323846 / RoadGeometry::kLaneWidth;
  return 0.5 * (1.0 + cos(kOmega * (y - RoadGeometry::kRightLaneCenter)));
}

template <typename T>
T left_lane(const T& y, const RewardConfig& cfg) {
  return sigmoid(T((y - RoadGeometry::kLaneWidth) / cfg.left_lane_scale));
}

template <typename T>
T ahead(const T& dx, const RewardConfig& cfg) {
  return sigmoid(T(dx / cfg.ahead_scale));
}

template <typename T>
T road_bounds(const T& y, const RewardConfig& cfg) {
  const double lo = RoadGeometry::kMinY + cfg.road_margin;
  const double hi = RoadGeometry::kMaxY - cfg.road_margin;
  T penalty = y * 0.0;
  if (y < lo) penalty = penalty - (lo - y) * (lo - y);
  if (y > hi) penalty = penalty - (y - hi) * (y - hi);
  return penalty;
}

template <typename T>
T speed(const T& v, double target) {
  return -((v - target) * (v - target));
}

}  // namespace features

namespace detail {

template <typename T, typename U>
T tactical_reward(const VehicleStateT<T>& self, const VehicleStateT<T>& other,
                  const VehicleControlT<U>& u, double target_speed,
                  bool ahead_term, const RewardConfig& cfg) {
  const RewardWeights& w = cfg.weights;
  const T dx = self.x - other.x;
  const T dy = self.y - other.y;
  const T heading = self.psi / cfg.heading_scale;
  const T steer = u.steer / cfg.steer_effort_scale;
  T r = w.collision_avoidance * features::collision(dx, dy, cfg);
  r = r + w.lane_center * (features::lane_center(self.y) - heading * heading);
  r = r + w.left_lane_preference * features::left_lane(self.y, cfg);
  r = r + w.target_speed * features::speed(self.v, target_speed);
  if (ahead_term) r = r + w.ahead_of_other * features::ahead(dx, cfg);
  r = r - w.control_effort * (u.accel * u.accel + steer * steer);
  r = r + w.road_bounds * features::road_bounds(self.y, cfg);
  return r;
}

// Per-stage strategic reward from one player's perspective. `speed_error` is
// the player's deviation from its target speed.
inline double strategic_reward(double dx, double y_self, double y_other,
                               double speed_error, double w_lat, double accel,
                               bool ahead_term, const RewardConfig& cfg) {
  const RewardWeights& w = cfg.weights;
  const double lat = w_lat / cfg.lateral_effort_scale;
  double r = w.collision_avoidance * features::collision(dx, y_self - y_other, cfg);
  r += w.lane_center * features::lane_center(y_self);
  r += w.left_lane_preference * features::left_lane(y_self, cfg);
  r -= w.target_speed * speed_error * speed_error;
  if (ahead_term) r += w.ahead_of_other * features::ahead(dx, cfg);
  r -= w.control_effort * (accel * accel + lat * lat);
  r += w.road_bounds * features::road_bounds(y_self, cfg);
  return cfg.strategic_scale * r;
}

}  // namespace detail

template <typename T, typename U>
T tactical_reward_A(const JointStateT<T>& x, const VehicleControlT<U>& uA,
                    const VehicleControlT<U>& /*uH*/, const RewardConfig& cfg) {
  return detail::tactical_reward(x.av, x.human, uA, cfg.target_speed_av, true, cfg);
}

template <typename T, typename U>
T tactical_reward_H(const JointStateT<T>& x, const VehicleControlT<U>& uH,
                    const VehicleControlT<U>& /*uA*/, const RewardConfig& cfg) {
  return detail::tactical_reward(x.human, x.av, uH, cfg.target_speed_human, false,
                                 cfg);
}

double strategic_reward_A(const Strat3State& s, const StratActionA& aA,
                          const StratActionH& aH, const RewardConfig& cfg);
double strategic_reward_A(const Strat4State& s, const StratActionA& aA,
                          const StratActionH& aH, const RewardConfig& cfg);
double strategic_reward_H(const Strat3State& s, const StratActionA& aA,
                          const StratActionH& aH, const RewardConfig& cfg);
double strategic_reward_H(const Strat4State& s, const StratActionA& aA,
                          const StratActionH& aH, const RewardConfig& cfg);

}  // namespace hgp
