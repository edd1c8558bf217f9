#include "hgp/reward.hpp"

#include <openssl/sha.h>

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <utility>
#include <vector>

#include "hgp/errors.hpp"
#include "hgp/text_io.hpp"

namespace hgp {

namespace {

// Field table shared by the serializer and the parser; order is the file order.
std::vector<std::pair<std::string, double RewardConfig::*>> weight_free_fields() {
  return {
      {"target_speed_av", &RewardConfig::target_speed_av},
      {"target_speed_human", &RewardConfig::target_speed_human},
      {"collision_sigma_x", &RewardConfig::collision_sigma_x},
      {"collision_sigma_y", &RewardConfig::collision_sigma_y},
      {"ahead_scale", &RewardConfig::ahead_scale},
      {"left_lane_scale", &RewardConfig::left_lane_scale},
      {"heading_scale", &RewardConfig::heading_scale},
      {"steer_effort_scale", &RewardConfig::steer_effort_scale},
      {"lateral_effort_scale", &RewardConfig::lateral_effort_scale},
      {"road_margin", &RewardConfig::road_margin},
      {"nominal_human_speed", &RewardConfig::nominal_human_speed},
      {"strategic_scale", &RewardConfig::strategic_scale},
  };
}

std::vector<std::pair<std::string, double RewardWeights::*>> weight_fields() {
  return {
      {"weight.collision_avoidance", &RewardWeights::collision_avoidance},
      {"weight.lane_center", &RewardWeights::lane_center},
      {"weight.left_lane_preference", &RewardWeights::left_lane_preference},
      {"weight.target_speed", &RewardWeights::target_speed},
      {"weight.ahead_of_other", &RewardWeights::ahead_of_other},
      {"weight.control_effort", &RewardWeights::control_effort},
      {"weight.road_bounds", &RewardWeights::road_bounds},
  };
}

}  // namespace

RewardConfig RewardConfig::scaled(double c) const {
  RewardConfig out = *this;
  for (const auto& [name, field] : weight_fields()) out.weights.*field *= c;
  return out;
}

void RewardConfig::validate() const {
  for (const auto& [name, field] : weight_fields()) {
    if (!std::isfinite(weights.*field)) throw ConfigError(name + " must be finite");
  }
  for (const auto& [name, field] : weight_free_fields()) {
    if (!std::isfinite(this->*field)) throw ConfigError(name + " must be finite");
  }
  if (weights.collision_avoidance > 0.0) {
    throw ConfigError("weight.collision_avoidance must be <= 0 (penalty)");
  }
  const std::pair<const char*, double> positive[] = {
      {"collision_sigma_x", collision_sigma_x},
      {"collision_sigma_y", collision_sigma_y},
      {"ahead_scale", ahead_scale},
      {"left_lane_scale", left_lane_scale},
      {"heading_scale", heading_scale},
      {"steer_effort_scale", steer_effort_scale},
      {"lateral_effort_scale", lateral_effort_scale},
      {"strategic_scale", strategic_scale},
  };
  for (const auto& [name, value] : positive) {
    if (!(value > 0.0)) throw ConfigError(std::string(name) + " must be > 0");
  }
  if (road_margin < 0.0) throw ConfigError("road_margin must be >= 0");
}

std::string RewardConfig::to_text() const {
  std::ostringstream out;
  out << "# reward configuration\n";
  for (const auto& [name, field] : weight_fields()) {
    out << name << " = " << format_double(weights.*field) << "\n";
  }
  for (const auto& [name, field] : weight_free_fields()) {
    out << name << " = " << format_double(this->*field) << "\n";
  }
  return out.str();
}

RewardConfig RewardConfig::from_text(const std::string& text) {
  RewardConfig cfg;
  const KeyValues kv = parse_key_values(text);
  std::map<std::string, std::function<void(double)>> setters;
  for (const auto& [name, field] : weight_fields()) {
    setters[name] = [&cfg, field](double v) { cfg.weights.*field = v; };
  }
  for (const auto& [name, field] : weight_free_fields()) {
    setters[name] = [&cfg, field](double v) { cfg.*field = v; };
  }
  for (const auto& [key, value] : kv) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown reward field '" + key + "'");
    it->second(parse_double(value, key));
  }
  cfg.validate();
  return cfg;
}

void RewardConfig::save(const std::filesystem::path& path) const {
  write_text_file(path, to_text());
}

RewardConfig RewardConfig::load(const std::filesystem::path& path) {
  return from_text(read_text_file(path));
}

std::array<std::uint8_t, 32> RewardConfig::hash() const {
  const std::string text = to_text();
  std::array<std::uint8_t, 32> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(),
         digest.data());
  return digest;
}

namespace {

double human_speed_error(const RewardConfig& cfg) {
  return cfg.nominal_human_speed - cfg.target_speed_human;
}

double av_speed_error(double v_rel, const RewardConfig& cfg) {
  return v_rel - (cfg.target_speed_av - cfg.nominal_human_speed);
}

}  // namespace

double strategic_reward_A(const Strat4State& s, const StratActionA& aA,
                          const StratActionH& /*aH*/, const RewardConfig& cfg) {
  return detail::strategic_reward(s.x_rel, s.y_A, s.y_H, av_speed_error(s.v_rel, cfg),
                                  aA.w_A, aA.a_A, true, cfg);
}

double strategic_reward_A(const Strat3State& s, const StratActionA& aA,
                          const StratActionH& aH, const RewardConfig& cfg) {
  return strategic_reward_A(Strat4State{s.x_rel, s.y_A, RoadGeometry::kLeftLaneCenter,
                                        s.v_rel},
                            aA, aH, cfg);
}

double strategic_reward_H(const Strat4State& s, const StratActionA& /*aA*/,
                          const StratActionH& aH, const RewardConfig& cfg) {
  return detail::strategic_reward(-s.x_rel, s.y_H, s.y_A, human_speed_error(cfg),
                                  aH.w_H, aH.a_H, false, cfg);
}

double strategic_reward_H(const Strat3State& s, const StratActionA& aA,
                          const StratActionH& aH, const RewardConfig& cfg) {
  StratActionH lateral_free = aH;
  lateral_free.w_H = 0.0;
  return strategic_reward_H(Strat4State{s.x_rel, s.y_A, RoadGeometry::kLeftLaneCenter,
                                        s.v_rel},
                            aA, lateral_free, cfg);
}

}  // namespace hgp
