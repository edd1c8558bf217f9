#include "hgp/sim_harness.hpp"

#include <openssl/sha.h>

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "hgp/errors.hpp"
#include "hgp/text_io.hpp"

namespace hgp {

using nlohmann::json;

std::string to_string(ScenarioName name) {
  switch (name) {
    case ScenarioName::kEasyMerge: return "easy_merge";
    case ScenarioName::kHardMerge: return "hard_merge";
    case ScenarioName::kOvertaking: return "overtaking";
  }
  return "unknown";
}

std::string to_string(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::kTactical: return "tactical";
    case PlannerKind::kHier3d: return "hier3d";
    case PlannerKind::kHier4d: return "hier4d";
    case PlannerKind::kLongHorizon: return "long_horizon";
  }
  return "unknown";
}

ScenarioName scenario_from_string(const std::string& name) {
  if (name == "easy_merge") return ScenarioName::kEasyMerge;
  if (name == "hard_merge") return ScenarioName::kHardMerge;
  if (name == "overtaking") return ScenarioName::kOvertaking;
  throw ConfigError("scenario: expected easy_merge, hard_merge or overtaking, got '" +
                    name + "'");
}

PlannerKind planner_kind_from_string(const std::string& name) {
  if (name == "tactical") return PlannerKind::kTactical;
  if (name == "hier3d") return PlannerKind::kHier3d;
  if (name == "hier4d") return PlannerKind::kHier4d;
  if (name == "long_horizon") return PlannerKind::kLongHorizon;
  throw ConfigError("planner: expected tactical, hier3d, hier4d or long_horizon, got '" +
                    name + "'");
}

bool footprints_overlap(const JointState& x) {
  return std::abs(x.av.x - x.human.x) < Footprint::kLength &&
         std::abs(x.av.y - x.human.y) < Footprint::kWidth;
}

bool in_left_lane_band(double y) {
  return std::abs(y - RoadGeometry::kLeftLaneCenter) <= SuccessCriteria::kLeftBandHalfWidth;
}

// ---------------------------------------------------------------------------

JointState ScenarioConfig::initial_state(ScenarioName name) {
  JointState x;
  x.human = {0.0, RoadGeometry::kLeftLaneCenter, 0.0, RoadGeometry::kNominalSpeed};
  x.av = {0.0, RoadGeometry::kRightLaneCenter, 0.0, 32.0};
  switch (name) {
    case ScenarioName::kEasyMerge: x.av.x = 15.0; break;
    case ScenarioName::kHardMerge: x.av.x = -15.0; break;
    case ScenarioName::kOvertaking:
      x.av.x = -20.0;
      x.av.y = RoadGeometry::kLeftLaneCenter;
      break;
  }
  return x;
}

ScenarioConfig ScenarioConfig::make(ScenarioName name, PlannerKind planner) {
  ScenarioConfig cfg;
  cfg.name = name;
  cfg.planner = planner;
  cfg.initial = initial_state(name);
  cfg.planner_config.use_value = planner == PlannerKind::kHier3d || planner == PlannerKind::kHier4d;
  if (planner == PlannerKind::kLongHorizon) {
    cfg.planner_config.M = 20;
    cfg.human.preview = 2.0;
  }
  cfg.human.rewards = cfg.planner_config.rewards;
  return cfg;
}

void ScenarioConfig::validate() const {
  if (!(episode_length > 0.0)) throw ConfigError("episode_length must be > 0");
  planner_config.validate();
  human.validate();
  if (std::abs(human.dt - planner_config.dt) > 1e-12) {
    throw ConfigError("human.dt must equal planner.dt");
  }
  const bool hier = planner == PlannerKind::kHier3d || planner == PlannerKind::kHier4d;
  if (hier) {
    if (!planner_config.use_value) throw ConfigError("planner: hierarchical planners need use_value");
    if (!planner_config.av_value) {
      throw ConfigError("planner " + to_string(planner) + " requires an AV value table");
    }
    const ModelTag want = planner == PlannerKind::kHier3d ? ModelTag::k3d : ModelTag::k4d;
    if (planner_config.av_value->model != want) {
      throw ConfigError("planner " + to_string(planner) + " requires a " + to_string(want) +
                        " value table, got " + to_string(planner_config.av_value->model));
    }
  } else if (planner_config.use_value && planner_config.av_value) {
    throw ConfigError("planner " + to_string(planner) + " does not use a value table");
  }
  for (const auto* t : {planner_config.av_value.get(), planner_config.human_value.get(),
                        human.value.get()}) {
    if (t && t->model == ModelTag::kGeneric) {
      throw ConfigError("value tables for driving must be 3d or 4d");
    }
  }
}

void ScenarioConfig::resolve_tables() {
  if (!av_value_path.empty()) {
    planner_config.av_value = std::make_shared<ValueTable>(ValueTable::load(av_value_path));
  }
  if (!human_value_path.empty()) {
    auto table = std::make_shared<ValueTable>(ValueTable::load(human_value_path));
    planner_config.human_value = table;
    human.value = table;
  }
}

// ---------------------------------------------------------------------------

namespace {

json state_json(const VehicleState& s) { return json::array({s.x, s.y, s.psi, s.v}); }

VehicleState state_from(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
          j.at(3).get<double>()};
}

json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
double from_nullable(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string hex(const std::array<std::uint8_t, 32>& bytes) {
  std::ostringstream out;
  for (auto b : bytes) out << std::hex << std::setw(2) << std::setfill('0') << int(b);
  return out.str();
}

json config_snapshot(const ScenarioConfig& c) {
  json j;
  j["scenario"] = to_string(c.name);
  j["planner"] = to_string(c.planner);
  j["episode_length"] = c.episode_length;
  j["seed"] = c.seed;
  j["initial"] = {{"av", state_json(c.initial.av)}, {"human", state_json(c.initial.human)}};
  j["planner_config"] = {{"M", c.planner_config.M},
                         {"dt", c.planner_config.dt},
                         {"max_rounds", c.planner_config.max_rounds},
                         {"round_tolerance", c.planner_config.round_tolerance},
                         {"influence_term", c.planner_config.influence_term},
                         {"use_value", c.planner_config.use_value},
                         {"value_stage", c.planner_config.value_stage},
                         {"value_weight", c.planner_config.value_weight},
                         {"rewards", c.planner_config.rewards.to_text()}};
  auto table_id = [](const std::shared_ptr<const ValueTable>& t) -> json {
    if (!t) return nullptr;
    return {{"model", to_string(t->model)}, {"beta", t->beta}, {"reward_hash", hex(t->reward_hash)}};
  };
  j["av_value"] = table_id(c.planner_config.av_value);
  j["planner_human_value"] = table_id(c.planner_config.human_value);
  j["human"] = {{"kind", to_string(c.human.kind)},
                {"constant_speed", c.human.constant_speed},
                {"preview", c.human.preview},
                {"rewards", c.human.rewards.to_text()},
                {"value", table_id(c.human.value)}};
  j["av_value_path"] = c.av_value_path.string();
  j["human_value_path"] = c.human_value_path.string();
  return j;
}

double value_at(const std::shared_ptr<const ValueTable>& table, const JointState& x, Player p,
                int stage) {
  if (!table) return std::numeric_limits<double>::quiet_NaN();
  if (table->model == ModelTag::k3d) return table->lookup(project_3d(x), stage, p);
  return table->lookup(project_4d(x), stage, p);
}

}  // namespace

std::string EpisodeLog::to_jsonl() const {
  std::ostringstream out;
  out << json{{"type", "header"},
              {"dt", dt},
              {"episode_length", episode_length},
              {"config", json::parse(config_json)}}
             .dump()
      << "\n";
  for (const StepRecord& r : steps) {
    out << json{{"type", "step"},
                {"t", r.t},
                {"av", state_json(r.state.av)},
                {"human", state_json(r.state.human)},
                {"u_A", {r.u_A.steer, r.u_A.accel}},
                {"u_H", {r.u_H.steer, r.u_H.accel}},
                {"reward_A", r.reward_A},
                {"reward_H", r.reward_H},
                {"objective", r.objective},
                {"value_A", nullable(r.value_A)},
                {"value_H", nullable(r.value_H)},
                {"rounds", r.rounds},
                {"converged", r.converged}}
               .dump()
        << "\n";
  }
  out << json{{"type", "final"},
              {"t", final_state.t},
              {"av", state_json(final_state.av)},
              {"human", state_json(final_state.human)},
              {"halted_on_collision", halted_on_collision}}
             .dump()
      << "\n";
  return out.str();
}

EpisodeLog EpisodeLog::from_jsonl(const std::string& text) {
  EpisodeLog log;
  std::istringstream in(text);
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type");
      if (type == "header") {
        saw_header = true;
        log.dt = j.at("dt");
        log.episode_length = j.at("episode_length");
        log.config_json = j.at("config").dump();
      } else if (type == "step") {
        StepRecord r;
        r.t = j.at("t");
        r.state.t = r.t;
        r.state.av = state_from(j.at("av"));
        r.state.human = state_from(j.at("human"));
        r.u_A = {j.at("u_A").at(0).get<double>(), j.at("u_A").at(1).get<double>()};
        r.u_H = {j.at("u_H").at(0).get<double>(), j.at("u_H").at(1).get<double>()};
        r.reward_A = j.at("reward_A");
        r.reward_H = j.at("reward_H");
        r.objective = j.at("objective");
        r.value_A = from_nullable(j.at("value_A"));
        r.value_H = from_nullable(j.at("value_H"));
        r.rounds = j.at("rounds");
        r.converged = j.at("converged");
        log.steps.push_back(r);
      } else if (type == "final") {
        log.final_state.t = j.at("t");
        log.final_state.av = state_from(j.at("av"));
        log.final_state.human = state_from(j.at("human"));
        log.halted_on_collision = j.at("halted_on_collision");
      } else {
        throw FormatError("episode log: unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw FormatError(std::string("episode log: ") + e.what());
    }
  }
  if (!saw_header) throw FormatError("episode log: missing header");
  return log;
}

std::string EpisodeLog::to_csv() const {
  std::ostringstream out;
  out << "t,x_A,y_A,psi_A,v_A,x_H,y_H,psi_H,v_H,steer_A,accel_A,steer_H,accel_H,"
         "reward_A,reward_H,objective,value_A,value_H,rounds,converged\n";
  for (const StepRecord& r : steps) {
    const double fields[] = {r.t,          r.state.av.x,    r.state.av.y,   r.state.av.psi,
                             r.state.av.v, r.state.human.x, r.state.human.y, r.state.human.psi,
                             r.state.human.v, r.u_A.steer,  r.u_A.accel,    r.u_H.steer,
                             r.u_H.accel,  r.reward_A,      r.reward_H,     r.objective,
                             r.value_A,    r.value_H};
    for (double f : fields) out << format_double(f) << ",";
    out << r.rounds << "," << (r.converged ? 1 : 0) << "\n";
  }
  return out.str();
}

std::string Metrics::csv_header() {
  return "success,collision,min_distance,time_to_merge,max_av_speed,final_gap,"
         "av_entered_left_band,min_av_accel";
}

std::string Metrics::csv_row() const {
  std::ostringstream out;
  out << (success ? "true" : "false") << "," << (collision ? "true" : "false") << ","
      << format_double(min_distance) << ","
      << (time_to_merge ? format_double(*time_to_merge) : std::string("none")) << ","
      << format_double(max_av_speed) << "," << format_double(final_gap) << ","
      << (av_entered_left_band ? "true" : "false") << "," << format_double(min_av_accel);
  return out.str();
}

// ---------------------------------------------------------------------------

EpisodeLog run_scenario(ScenarioConfig cfg) {
  cfg.resolve_tables();
  if (cfg.planner_config.human_value == nullptr && cfg.human.value != nullptr &&
      cfg.human_value_path.empty()) {
    // The AV predicts the human with the same strategic value she uses.
    cfg.planner_config.human_value = cfg.human.value;
  }
  cfg.validate();

  EpisodeLog log;
  log.dt = cfg.planner_config.dt;
  log.episode_length = cfg.episode_length;
  log.config_json = config_snapshot(cfg).dump();

  TacticalPlanner planner(cfg.planner_config);
  HumanModel human(cfg.human);
  const int steps = static_cast<int>(std::lround(cfg.episode_length / log.dt));
  const int preview = cfg.human.preview_steps();
  const MoverModel av_model = cfg.planner_config.mover(Player::kA);

  JointState x = cfg.initial;
  x.t = 0.0;
  for (int i = 0; i < steps; ++i) {
    PlanResult plan;
    switch (cfg.planner) {
      case PlannerKind::kLongHorizon: plan = plan_long_horizon(planner, x); break;
      default:
        plan = cfg.planner_config.influence_term ? planner.plan_with_influence(x)
                                                 : planner.plan(x);
    }
    // The human anticipates the AV's committed plan over her preview window.
    ControlSequence committed = ControlSequence::Zero(2, preview);
    const Eigen::Index n = std::min<Eigen::Index>(preview, plan.controls_A.cols());
    committed.leftCols(n) = plan.controls_A.leftCols(n);
    for (Eigen::Index c = n; c < preview; ++c) committed.col(c) = plan.controls_A.col(n - 1);

    StepRecord r;
    r.t = x.t;
    r.state = x;
    r.u_A = {plan.controls_A(0, 0), plan.controls_A(1, 0)};
    r.u_H = human.act(x, committed);
    r.reward_A = tactical_reward_A(x, r.u_A, r.u_H, cfg.planner_config.rewards);
    r.reward_H = tactical_reward_H(x, r.u_H, r.u_A, cfg.human.rewards);
    r.objective = plan.objective;
    r.value_A = value_at(av_model.value, x, Player::kA, cfg.planner_config.value_stage);
    r.value_H = value_at(cfg.human.value, x, Player::kH, cfg.human.value_stage);
    r.rounds = plan.rounds;
    r.converged = plan.converged;
    log.steps.push_back(r);

    x = step_joint(x, r.u_A, r.u_H, log.dt);
    if (footprints_overlap(x)) {
      log.halted_on_collision = true;
      break;
    }
  }
  log.final_state = x;
  return log;
}

Metrics evaluate(const EpisodeLog& log) {
  if (log.steps.empty()) throw ConfigError("evaluate: empty episode log");
  Metrics m;
  std::vector<JointState> states;
  for (const StepRecord& r : log.steps) states.push_back(r.state);
  states.push_back(log.final_state);

  m.min_distance = std::numeric_limits<double>::infinity();
  m.min_av_accel = std::numeric_limits<double>::infinity();
  for (const JointState& x : states) {
    m.min_distance = std::min(m.min_distance, std::hypot(x.av.x - x.human.x, x.av.y - x.human.y));
    m.max_av_speed = std::max(m.max_av_speed, x.av.v);
    m.collision = m.collision || footprints_overlap(x);
    m.av_entered_left_band = m.av_entered_left_band || in_left_lane_band(x.av.y);
  }
  for (const StepRecord& r : log.steps) m.min_av_accel = std::min(m.min_av_accel, r.u_A.accel);

  auto merged = [](const JointState& x) {
    return in_left_lane_band(x.av.y) && x.av.x - x.human.x >= SuccessCriteria::kMinLead;
  };
  const JointState& end = states.back();
  m.final_gap = end.av.x - end.human.x;
  m.success = !m.collision && merged(end);
  if (m.success) {
    std::size_t first = states.size() - 1;
    while (first > 0 && merged(states[first - 1])) --first;
    m.time_to_merge = states[first].t;
  }
  return m;
}

// ---------------------------------------------------------------------------

std::string table_cache_key(const SolverInputs& in) {
  std::ostringstream desc;
  desc << "model=" << to_string(in.model) << ";beta=" << format_double(in.params.beta)
       << ";K=" << in.params.K << ";alpha=" << format_double(in.params.alpha)
       << ";dk=" << format_double(in.params.dk) << ";";
  for (const Axis& a : in.grid.axes) {
    desc << a.name << ":" << format_double(a.min) << ":" << format_double(a.max) << ":"
         << a.count << ";";
  }
  for (const StratActionA& a : in.actions.leader) {
    desc << "L" << format_double(a.w_A) << "," << format_double(a.a_A) << ";";
  }
  for (const StratActionH& h : in.actions.follower) {
    desc << "F" << format_double(h.a_H) << "," << format_double(h.w_H) << ";";
  }
  desc << in.rewards.to_text();
  const std::string text = desc.str();
  std::array<std::uint8_t, 32> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest.data());
  return to_string(in.model) + "_" + hex(digest).substr(0, 24) + ".sgvt";
}

std::shared_ptr<const ValueTable> solve_cached(const SolverInputs& in,
                                               const std::filesystem::path& cache_dir) {
  const std::filesystem::path file = cache_dir / table_cache_key(in);
  if (std::filesystem::exists(file)) {
    return std::make_shared<ValueTable>(ValueTable::load(file));
  }
  auto table = std::make_shared<ValueTable>(
      solve_highway(in.model, in.grid, in.actions, in.rewards, in.params));
  std::filesystem::create_directories(cache_dir);
  const std::filesystem::path tmp = file.string() + ".tmp";
  table->save(tmp);
  std::filesystem::rename(tmp, file);
  return table;
}

std::vector<SweepRow> sweep_beta(const ScenarioConfig& scenario,
                                 const std::vector<double>& betas, SolverInputs solver,
                                 const std::filesystem::path& cache_dir) {
  std::vector<SweepRow> rows;
  for (double beta : betas) {
    if (!(beta >= 0.0)) throw ConfigError("sweep: betas must be >= 0");
    solver.params.beta = beta;
    SweepRow row;
    row.beta = beta;
    row.cache_hit = std::filesystem::exists(cache_dir / table_cache_key(solver));
    const auto t0 = std::chrono::steady_clock::now();
    auto table = solve_cached(solver, cache_dir);
    row.solve_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ScenarioConfig cfg = scenario;
    cfg.av_value_path.clear();
    cfg.planner_config.av_value = table;
    cfg.planner_config.use_value = true;
    row.metrics = evaluate(run_scenario(cfg));
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "beta," << Metrics::csv_header() << ",solve_seconds,cache_hit\n";
  for (const SweepRow& r : rows) {
    out << format_double(r.beta) << "," << r.metrics.csv_row() << ","
        << format_double(r.solve_seconds) << "," << (r.cache_hit ? "true" : "false") << "\n";
  }
  return out.str();
}

}  // namespace hgp
