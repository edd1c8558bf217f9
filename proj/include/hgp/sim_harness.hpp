#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hgp/human_models.hpp"
#include "hgp/strategic_game.hpp"
#include "hgp/tactical_planner.hpp"

namespace hgp {

enum class ScenarioName { kEasyMerge, kHardMerge, kOvertaking };
enum class PlannerKind { kTactical, kHier3d, kHier4d, kLongHorizon };

std::string to_string(ScenarioName name);
std::string to_string(PlannerKind kind);
ScenarioName scenario_from_string(const std::string& name);
PlannerKind planner_kind_from_string(const std::string& name);

// Vehicle footprint used for the hard collision check (axis-aligned).
struct Footprint {
  static constexpr double kLength = 4.5;
  static constexpr double kWidth = 1.8;
};

struct SuccessCriteria {
  static constexpr double kMinLead = 10.0;          // x_A - x_H, m
  static constexpr double kLeftBandHalfWidth = 1.0;  // around the left lane center, m
};

bool footprints_overlap(const JointState& x);
bool in_left_lane_band(double y);

struct ScenarioConfig {
  ScenarioName name = ScenarioName::kOvertaking;
  JointState initial;
  PlannerKind planner = PlannerKind::kTactical;
  PlannerConfig planner_config;
  HumanModelConfig human;
  double episode_length = 15.0;
  std::filesystem::path av_value_path;
  std::filesystem::path human_value_path;
  std::uint64_t seed = 0;

  // Documented initial conditions: human in the left lane at 30 m/s, AV at
  // 32 m/s; easy merge AV 15 m ahead in the right lane, hard merge 15 m
  // behind in the right lane, overtaking 20 m behind in the left lane.
  static JointState initial_state(ScenarioName name);
  static ScenarioConfig make(ScenarioName name, PlannerKind planner);

  // Throws ConfigError on inconsistent settings, including a hierarchical
  // planner without a value table of the matching model.
  void validate() const;

  // Loads value tables named by path into planner_config / human.
  void resolve_tables();
};

struct StepRecord {
  double t = 0.0;
  JointState state;
  VehicleControl u_A;
  VehicleControl u_H;
  double reward_A = 0.0;
  double reward_H = 0.0;
  double objective = 0.0;
  double value_A = 0.0;  // NaN without an AV table
  double value_H = 0.0;  // NaN without a human table
  int rounds = 0;
  bool converged = false;
};

struct EpisodeLog {
  std::string config_json;  // snapshot of the ScenarioConfig
  double dt = 0.1;
  double episode_length = 0.0;
  std::vector<StepRecord> steps;
  JointState final_state;
  bool halted_on_collision = false;

  // One JSON object per line: a header, then one record per step, then the
  // final state.
  std::string to_jsonl() const;
  static EpisodeLog from_jsonl(const std::string& text);
  std::string to_csv() const;
};

struct Metrics {
  bool success = false;
  bool collision = false;
  double min_distance = 0.0;
  std::optional<double> time_to_merge;
  double max_av_speed = 0.0;
  double final_gap = 0.0;  // x_A - x_H at the end
  bool av_entered_left_band = false;
  double min_av_accel = 0.0;

  static std::string csv_header();
  std::string csv_row() const;
};

EpisodeLog run_scenario(ScenarioConfig cfg);
Metrics evaluate(const EpisodeLog& log);

struct SolverInputs {
  ModelTag model = ModelTag::k4d;
  GridSpec grid = GridSpec::default_4d();
  ActionGrid actions = ActionGrid::default_4d();
  RewardConfig rewards;
  SolverParams params;
};

// Cache file name for a solve; stable across runs.
std::string table_cache_key(const SolverInputs& in);

// Loads the table from `cache_dir` when present, otherwise solves and stores it.
std::shared_ptr<const ValueTable> solve_cached(const SolverInputs& in,
                                               const std::filesystem::path& cache_dir);

struct SweepRow {
  double beta = 0.0;
  Metrics metrics;
  double solve_seconds = 0.0;
  bool cache_hit = false;
};

// Runs `scenario` once per beta with the AV table solved at that beta.
std::vector<SweepRow> sweep_beta(const ScenarioConfig& scenario,
                                 const std::vector<double>& betas, SolverInputs solver,
                                 const std::filesystem::path& cache_dir);

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace hgp
