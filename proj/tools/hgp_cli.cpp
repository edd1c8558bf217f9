// hgp: command-line front end for the strategic solver, the tactical planner
// and the scenario harness.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hgp/errors.hpp"
#include "hgp/sim_harness.hpp"
#include "hgp/text_io.hpp"

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr const char* kVersion = "0.1.0";

std::string hex(const std::array<std::uint8_t, 32>& bytes) {
  std::ostringstream out;
  for (auto b : bytes) out << std::hex << std::setw(2) << std::setfill('0') << int(b);
  return out.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::filesystem::path cache_dir() {
  if (const char* env = std::getenv("HGP_CACHE_DIR"); env && *env) return env;
  return ".hgp_cache";
}

hgp::RewardConfig load_rewards(const std::string& path) {
  return path.empty() ? hgp::RewardConfig{} : hgp::RewardConfig::load(path);
}

json table_id(const std::string& path, const hgp::ValueTable& t) {
  return {{"path", path},
          {"model", hgp::to_string(t.model)},
          {"beta", t.beta},
          {"K", t.grid.K},
          {"reward_hash", hex(t.reward_hash)}};
}

struct Manifest {
  json doc;
  Clock::time_point start = Clock::now();

  Manifest(int argc, char** argv, const std::string& command) {
    json args = json::array();
    for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
    doc["command"] = command;
    doc["argv"] = args;
    doc["version"] = kVersion;
    doc["cache_dir"] = cache_dir().string();
    doc["timings"] = json::object();
  }

  void write(const std::filesystem::path& out) {
    doc["timings"]["total_seconds"] = seconds_since(start);
    hgp::write_text_file(out.string() + ".manifest.json", doc.dump(2) + "\n");
  }
};

// Solver inputs shared by solve and sweep-beta. Grid ranges and action sets
// come from the model defaults; K, dk and alpha from an optional params file.
hgp::SolverInputs solver_inputs(const std::string& model, const std::string& rewards_path,
                                const std::string& params_path) {
  hgp::SolverInputs in;
  in.model = hgp::model_tag_from_string(model);
  if (in.model == hgp::ModelTag::k3d) {
    in.grid = hgp::GridSpec::default_3d();
    in.actions = hgp::ActionGrid::default_3d();
  } else if (in.model == hgp::ModelTag::k4d) {
    in.grid = hgp::GridSpec::default_4d();
    in.actions = hgp::ActionGrid::default_4d();
  } else {
    throw hgp::ConfigError("model: expected 3d or 4d");
  }
  in.rewards = load_rewards(rewards_path);
  if (!params_path.empty()) {
    for (const auto& [key, value] : hgp::parse_key_values(hgp::read_text_file(params_path))) {
      if (key == "K") {
        in.params.K = static_cast<int>(hgp::parse_double(value, key));
      } else if (key == "dk") {
        in.params.dk = hgp::parse_double(value, key);
      } else if (key == "alpha") {
        in.params.alpha = hgp::parse_double(value, key);
      } else {
        throw hgp::ConfigError("solver params: unknown key '" + key + "'");
      }
    }
  }
  in.grid.K = in.params.K;
  in.grid.dk = in.params.dk;
  return in;
}

bool parse_bool(const std::string& value, const std::string& field) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw hgp::ConfigError(field + ": expected true or false, got '" + value + "'");
}

// Scenario overrides, one `key = value` per line.
void apply_scenario_file(hgp::ScenarioConfig& cfg, const std::string& path) {
  for (const auto& [key, value] : hgp::parse_key_values(hgp::read_text_file(path))) {
    auto num = [&] { return hgp::parse_double(value, key); };
    if (key == "episode_length") cfg.episode_length = num();
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(num());
    else if (key == "initial.av.x") cfg.initial.av.x = num();
    else if (key == "initial.av.y") cfg.initial.av.y = num();
    else if (key == "initial.av.v") cfg.initial.av.v = num();
    else if (key == "initial.human.x") cfg.initial.human.x = num();
    else if (key == "initial.human.y") cfg.initial.human.y = num();
    else if (key == "initial.human.v") cfg.initial.human.v = num();
    else if (key == "planner.M") cfg.planner_config.M = static_cast<int>(num());
    else if (key == "planner.max_rounds") cfg.planner_config.max_rounds = static_cast<int>(num());
    else if (key == "planner.round_tolerance") cfg.planner_config.round_tolerance = num();
    else if (key == "planner.influence_term")
      cfg.planner_config.influence_term = parse_bool(value, key);
    else if (key == "planner.value_weight") cfg.planner_config.value_weight = num();
    else if (key == "human.kind") cfg.human.kind = hgp::human_kind_from_string(value);
    else if (key == "human.constant_speed") cfg.human.constant_speed = num();
    else if (key == "human.preview") cfg.human.preview = num();
    else throw hgp::ConfigError("scenario config: unknown key '" + key + "'");
  }
}

struct RunArgs {
  std::string scenario = "overtaking";
  std::string planner = "tactical";
  std::string value;
  std::string human_value;
  std::string rewards;
  std::string config;
  std::string out = "episode";
  bool influence = false;
};

hgp::ScenarioConfig scenario_config(const RunArgs& a) {
  auto cfg = hgp::ScenarioConfig::make(hgp::scenario_from_string(a.scenario),
                                       hgp::planner_kind_from_string(a.planner));
  const hgp::RewardConfig rewards = load_rewards(a.rewards);
  cfg.planner_config.rewards = rewards;
  cfg.human.rewards = rewards;
  cfg.av_value_path = a.value;
  cfg.human_value_path = a.human_value;
  if (!a.config.empty()) apply_scenario_file(cfg, a.config);
  if (a.influence) cfg.planner_config.influence_term = true;
  const bool hier = cfg.planner == hgp::PlannerKind::kHier3d ||
                    cfg.planner == hgp::PlannerKind::kHier4d;
  if (hier && a.value.empty()) {
    throw hgp::ConfigError("--value: planner " + a.planner + " requires a value table");
  }
  return cfg;
}

int cmd_solve(int argc, char** argv, const std::string& model, double beta,
              const std::string& rewards, const std::string& params, unsigned threads,
              const std::string& out) {
  Manifest manifest(argc, argv, "solve");
  hgp::SolverInputs in = solver_inputs(model, rewards, params);
  in.params.beta = beta;
  in.params.threads = threads;
  const auto t0 = Clock::now();
  const hgp::ValueTable table =
      hgp::solve_highway(in.model, in.grid, in.actions, in.rewards, in.params);
  const double solve_s = seconds_since(t0);
  table.save(out);

  std::cout << "model " << hgp::to_string(table.model) << "  beta " << table.beta << "  cells "
            << table.grid.cell_count() << "  stages " << table.stages() << "\n";
  std::cout << "leader actions " << table.leader_actions.size() << "  follower actions "
            << table.follower_actions.size() << "\n";
  std::cout << "solve " << std::fixed << std::setprecision(2) << solve_s << " s  ("
            << solve_s / in.params.K << " s per stage)\n";
  std::cout << "V_A range [" << table.value_A.minCoeff() << ", " << table.value_A.maxCoeff()
            << "]  V_H range [" << table.value_H.minCoeff() << ", " << table.value_H.maxCoeff()
            << "]\n";

  manifest.doc["rewards_hash"] = hex(in.rewards.hash());
  manifest.doc["threads"] = hgp::detail::resolve_threads(threads);
  manifest.doc["output"] = table_id(out, table);
  manifest.doc["timings"]["solve_seconds"] = solve_s;
  manifest.doc["timings"]["seconds_per_stage"] = solve_s / in.params.K;
  manifest.write(out);
  return 0;
}

int cmd_run(int argc, char** argv, const RunArgs& a) {
  Manifest manifest(argc, argv, "run");
  const hgp::ScenarioConfig cfg = scenario_config(a);
  const auto t0 = Clock::now();
  const hgp::EpisodeLog log = hgp::run_scenario(cfg);
  const double run_s = seconds_since(t0);
  const hgp::Metrics m = hgp::evaluate(log);

  hgp::write_text_file(a.out + ".jsonl", log.to_jsonl());
  hgp::write_text_file(a.out + ".csv", log.to_csv());
  hgp::write_text_file(a.out + ".metrics.csv",
                       hgp::Metrics::csv_header() + "\n" + m.csv_row() + "\n");

  std::cout << hgp::Metrics::csv_header() << "\n" << m.csv_row() << "\n";
  manifest.doc["rewards_hash"] = hex(cfg.planner_config.rewards.hash());
  manifest.doc["config"] = json::parse(log.config_json);
  manifest.doc["timings"]["episode_seconds"] = run_s;
  manifest.write(a.out);
  return 0;
}

std::vector<double> parse_betas(const std::string& text) {
  std::vector<double> betas;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) betas.push_back(hgp::parse_double(item, "betas"));
  if (betas.empty()) throw hgp::ConfigError("betas: empty list");
  return betas;
}

int cmd_sweep(int argc, char** argv, const RunArgs& a, const std::string& model,
              const std::string& betas_text, const std::string& params, unsigned threads) {
  Manifest manifest(argc, argv, "sweep-beta");
  RunArgs run = a;
  run.value.clear();
  hgp::ScenarioConfig cfg = hgp::ScenarioConfig::make(
      hgp::scenario_from_string(a.scenario),
      model == "3d" ? hgp::PlannerKind::kHier3d : hgp::PlannerKind::kHier4d);
  const hgp::RewardConfig rewards = load_rewards(a.rewards);
  cfg.planner_config.rewards = rewards;
  cfg.human.rewards = rewards;
  cfg.human_value_path = a.human_value;
  if (!a.config.empty()) apply_scenario_file(cfg, a.config);

  hgp::SolverInputs in = solver_inputs(model, a.rewards, params);
  in.params.threads = threads;
  const std::vector<double> betas = parse_betas(betas_text);
  const auto rows = hgp::sweep_beta(cfg, betas, in, cache_dir());
  const std::string csv = hgp::sweep_csv(rows);
  hgp::write_text_file(a.out, csv);
  std::cout << csv;

  manifest.doc["rewards_hash"] = hex(rewards.hash());
  json keys = json::array();
  for (double b : betas) {
    in.params.beta = b;
    keys.push_back(hgp::table_cache_key(in));
  }
  manifest.doc["value_tables"] = keys;
  manifest.write(a.out);
  return 0;
}

int cmd_heatmap(int argc, char** argv, const std::string& value, int k,
                const std::vector<std::string>& fixed_args, const std::string& rows,
                const std::string& cols, const std::string& player, const std::string& out) {
  Manifest manifest(argc, argv, "heatmap");
  const hgp::ValueTable table = hgp::ValueTable::load(value);
  std::map<std::string, double> fixed;
  for (const std::string& f : fixed_args) {
    const auto eq = f.find('=');
    if (eq == std::string::npos) throw hgp::ConfigError("--fix: expected axis=value, got '" + f + "'");
    fixed[f.substr(0, eq)] = hgp::parse_double(f.substr(eq + 1), "--fix " + f.substr(0, eq));
  }
  if (player != "A" && player != "H") throw hgp::ConfigError("--player: expected A or H");
  const std::pair<std::string, std::string> free{rows, cols};
  const Eigen::MatrixXd slice = hgp::export_heatmap_slice(
      table, k, fixed, free, player == "A" ? hgp::Player::kA : hgp::Player::kH);
  hgp::write_text_file(out + ".csv", hgp::heatmap_csv(table, slice, free));
  const auto ppm = hgp::heatmap_ppm(slice);
  std::ofstream(out + ".ppm", std::ios::binary)
      .write(reinterpret_cast<const char*>(ppm.data()), static_cast<std::streamsize>(ppm.size()));
  std::cout << slice.rows() << " x " << slice.cols() << " slice, range [" << slice.minCoeff()
            << ", " << slice.maxCoeff() << "]\n";
  manifest.doc["value_table"] = table_id(value, table);
  manifest.write(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical game-theoretic planning for driving"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string model = "3d";
  double beta = 1.0;
  std::string rewards, params, out;
  unsigned threads = 0;

  auto* solve = app.add_subcommand("solve", "Solve the strategic game and write a value table");
  solve->add_option("--model", model, "3d or 4d")->check(CLI::IsMember({"3d", "4d"}));
  solve->add_option("--beta", beta, "Follower inverse temperature")->check(CLI::NonNegativeNumber);
  solve->add_option("--rewards", rewards, "Reward config file")->check(CLI::ExistingFile);
  solve->add_option("--params", params, "Solver params file (K, dk, alpha)")
      ->check(CLI::ExistingFile);
  solve->add_option("--threads", threads, "Worker threads (0 = all cores)");
  solve->add_option("--out", out, "Output value-table path")->required();

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run one closed-loop scenario");
  run->add_option("--scenario", ra.scenario, "easy_merge, hard_merge or overtaking");
  run->add_option("--planner", ra.planner, "tactical, hier3d, hier4d or long_horizon");
  run->add_option("--value", ra.value, "AV value table")->check(CLI::ExistingFile);
  run->add_option("--human-value", ra.human_value, "Human value table")
      ->check(CLI::ExistingFile);
  run->add_option("--rewards", ra.rewards, "Reward config file")->check(CLI::ExistingFile);
  run->add_option("--config", ra.config, "Scenario override file")->check(CLI::ExistingFile);
  run->add_flag("--influence", ra.influence, "Include the influence term");
  run->add_option("--out", ra.out, "Output prefix (.jsonl, .csv, .metrics.csv)");

  RunArgs sa;
  std::string betas = "0.1,1.0";
  std::string sweep_model = "4d";
  auto* sweep = app.add_subcommand("sweep-beta", "Run a scenario across follower temperatures");
  sweep->add_option("--scenario", sa.scenario, "easy_merge, hard_merge or overtaking");
  sweep->add_option("--model", sweep_model, "3d or 4d")->check(CLI::IsMember({"3d", "4d"}));
  sweep->add_option("--betas", betas, "Comma-separated list");
  sweep->add_option("--human-value", sa.human_value, "Human value table")
      ->check(CLI::ExistingFile);
  sweep->add_option("--rewards", sa.rewards, "Reward config file")->check(CLI::ExistingFile);
  sweep->add_option("--params", params, "Solver params file")->check(CLI::ExistingFile);
  sweep->add_option("--config", sa.config, "Scenario override file")->check(CLI::ExistingFile);
  sweep->add_option("--threads", threads, "Worker threads (0 = all cores)");
  sweep->add_option("--out", sa.out, "Output CSV")->required();

  std::string value, rows = "x_rel", cols = "y_A", player = "A", heat_out;
  std::vector<std::string> fixed;
  int stage = 0;
  auto* heat = app.add_subcommand("heatmap", "Export a 2-D slice of a value table");
  heat->add_option("--value", value, "Value table")->required()->check(CLI::ExistingFile);
  heat->add_option("--stage", stage, "Stage index");
  heat->add_option("--rows", rows, "Row axis");
  heat->add_option("--cols", cols, "Column axis");
  heat->add_option("--fix", fixed, "axis=value for the remaining axes");
  heat->add_option("--player", player, "A or H");
  heat->add_option("--out", heat_out, "Output prefix (.csv, .ppm)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return cmd_solve(argc, argv, model, beta, rewards, params, threads, out);
    if (*run) return cmd_run(argc, argv, ra);
    if (*sweep) return cmd_sweep(argc, argv, sa, sweep_model, betas, params, threads);
    if (*heat) return cmd_heatmap(argc, argv, value, stage, fixed, rows, cols, player, heat_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
