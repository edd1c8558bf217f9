#include "hgp/strategic_game.hpp"

#include <string>

namespace hgp {

namespace detail {

void boltzmann_into(std::span<const double> q, double beta, std::span<double> out) {
  double top = q[0];
  for (double v : q) top = std::max(top, v);
  double total = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    out[i] = std::exp(beta * (q[i] - top));
    total += out[i];
  }
  for (double& p : out) p /= total;
}

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_chunks(std::size_t n, unsigned threads,
                     const std::function<void(std::size_t, std::size_t)>& body) {
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

Eigen::VectorXd boltzmann(std::span<const double> q, double beta) {
  if (q.empty()) throw ConfigError("boltzmann: empty utility vector");
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw ConfigError("boltzmann: beta must be finite and >= 0");
  }
  for (double v : q) {
    if (!std::isfinite(v)) throw NumericalError("boltzmann: non-finite utility");
  }
  Eigen::VectorXd p(static_cast<Eigen::Index>(q.size()));
  detail::boltzmann_into(q, beta, {p.data(), q.size()});
  return p;
}

ActionGrid ActionGrid::default_3d() {
  ActionGrid g;
  for (double w : {-2.5, 0.0, 2.5}) {
    for (double a : {-4.0, 0.0, 4.0}) g.leader.push_back({w, a});
  }
  for (double a : {-4.0, 0.0, 4.0}) g.follower.push_back({a, 0.0});
  return g;
}

ActionGrid ActionGrid::default_4d() {
  ActionGrid g = default_3d();
  g.follower.clear();
  for (double a : {-4.0, 0.0, 4.0}) {
    for (double w : {-2.5, 0.0, 2.5}) g.follower.push_back({a, w});
  }
  return g;
}

void ActionGrid::validate(ModelTag model) const {
  if (leader.empty()) throw ConfigError("actions.leader: empty");
  if (follower.empty()) throw ConfigError("actions.follower: empty");
  constexpr double kTol = 1e-12;
  auto check = [](double v, double lo, double hi, const std::string& field) {
    if (!std::isfinite(v) || v < lo - kTol || v > hi + kTol) {
      throw ConfigError(field + " out of bounds");
    }
  };
  const double w_max = VehicleLimits::kLateralSpeedMax;
  for (const StratActionA& a : leader) {
    check(a.w_A, -w_max, w_max, "actions.leader.w_A");
    check(a.a_A, VehicleLimits::kAccelMin, VehicleLimits::kAccelMax, "actions.leader.a_A");
  }
  for (const StratActionH& h : follower) {
    check(h.a_H, VehicleLimits::kAccelMin, VehicleLimits::kAccelMax, "actions.follower.a_H");
    check(h.w_H, -w_max, w_max, "actions.follower.w_H");
    if (model == ModelTag::k3d && h.w_H != 0.0) {
      throw ConfigError("actions.follower.w_H must be 0 for the 3d model");
    }
  }
}

void SolverParams::validate() const {
  if (!std::isfinite(beta) || beta < 0.0) throw ConfigError("beta must be finite and >= 0");
  if (K < 0 || K > 65535) throw ConfigError("K must be in [0, 65535]");
  if (!std::isfinite(alpha)) throw ConfigError("alpha must be finite");
  if (!(dk > 0.0)) throw ConfigError("dk must be > 0");
}

// ---------------------------------------------------------------------------

Highway3dGame::Highway3dGame(ActionGrid actions, RewardConfig rewards, double alpha,
                             double dk)
    : actions_(std::move(actions)), rewards_(std::move(rewards)), alpha_(alpha), dk_(dk) {
  actions_.validate(ModelTag::k3d);
  rewards_.validate();
}

Highway3dGame::State Highway3dGame::step(const State& s, int a, int h) const {
  return step_strategic_3d(Strat3State::from(s), actions_.leader[a], actions_.follower[h],
                           dk_, alpha_)
      .vector();
}

double Highway3dGame::reward_A(const State& s, int a, int h) const {
  return strategic_reward_A(Strat3State::from(s), actions_.leader[a],
                            actions_.follower[h], rewards_);
}

double Highway3dGame::reward_H(const State& s, int a, int h) const {
  return strategic_reward_H(Strat3State::from(s), actions_.leader[a],
                            actions_.follower[h], rewards_);
}

ActionTuples Highway3dGame::leader_tuples() const {
  ActionTuples t{2, {}};
  for (const StratActionA& a : actions_.leader) t.values.insert(t.values.end(), {a.w_A, a.a_A});
  return t;
}

ActionTuples Highway3dGame::follower_tuples() const {
  ActionTuples t{1, {}};
  for (const StratActionH& h : actions_.follower) t.values.push_back(h.a_H);
  return t;
}

Highway4dGame::Highway4dGame(ActionGrid actions, RewardConfig rewards, double alpha,
                             double dk)
    : actions_(std::move(actions)), rewards_(std::move(rewards)), alpha_(alpha), dk_(dk) {
  actions_.validate(ModelTag::k4d);
  rewards_.validate();
}

Highway4dGame::State Highway4dGame::step(const State& s, int a, int h) const {
  return step_strategic_4d(Strat4State::from(s), actions_.leader[a], actions_.follower[h],
                           dk_, alpha_)
      .vector();
}

double Highway4dGame::reward_A(const State& s, int a, int h) const {
  return strategic_reward_A(Strat4State::from(s), actions_.leader[a],
                            actions_.follower[h], rewards_);
}

double Highway4dGame::reward_H(const State& s, int a, int h) const {
  return strategic_reward_H(Strat4State::from(s), actions_.leader[a],
                            actions_.follower[h], rewards_);
}

ActionTuples Highway4dGame::leader_tuples() const {
  ActionTuples t{2, {}};
  for (const StratActionA& a : actions_.leader) t.values.insert(t.values.end(), {a.w_A, a.a_A});
  return t;
}

ActionTuples Highway4dGame::follower_tuples() const {
  ActionTuples t{2, {}};
  for (const StratActionH& h : actions_.follower) {
    t.values.insert(t.values.end(), {h.a_H, h.w_H});
  }
  return t;
}

ValueTable solve_highway(ModelTag model, const GridSpec& grid, const ActionGrid& actions,
                         const RewardConfig& rewards, const SolverParams& params) {
  GridSpec g = grid;
  g.K = params.K;
  g.dk = params.dk;
  switch (model) {
    case ModelTag::k3d:
      return solve(Highway3dGame(actions, rewards, params.alpha, params.dk), g, params);
    case ModelTag::k4d:
      return solve(Highway4dGame(actions, rewards, params.alpha, params.dk), g, params);
    case ModelTag::kGeneric:
      break;
  }
  throw ConfigError("model: solve_highway needs 3d or 4d");
}

}  // namespace hgp
