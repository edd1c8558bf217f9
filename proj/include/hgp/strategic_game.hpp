#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <span>
#include <sstream>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "hgp/dynamics.hpp"
#include "hgp/errors.hpp"
#include "hgp/grid.hpp"
#include "hgp/reward.hpp"
#include "hgp/value_table.hpp"

namespace hgp {

// Noisy-rational follower: p_i proportional to exp(beta * q_i), evaluated with
// the maximum subtracted. Throws on empty input, non-finite q, or beta < 0.
Eigen::VectorXd boltzmann(std::span<const double> q, double beta);

namespace detail {
// Allocation-free form of boltzmann(); `out` must have q.size() entries.
void boltzmann_into(std::span<const double> q, double beta, std::span<double> out);
}  // namespace detail

struct ActionGrid {
  std::vector<StratActionA> leader;
  std::vector<StratActionH> follower;

  // 3x3 leader set over w_A x a_A; follower a_H (3-D) or a_H x w_H (4-D).
  static ActionGrid default_3d();
  static ActionGrid default_4d();

  // Throws ConfigError on empty lists or actions outside vehicle limits.
  void validate(ModelTag model) const;
};

struct SolverParams {
  double beta = 1.0;  // follower inverse temperature
  int K = 10;
  double alpha = 0.1;  // relative-speed friction, 1/s
  double dk = 0.5;
  unsigned threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

// A discretized two-player game the solver can sweep.
template <typename G>
concept StrategicGame = requires(const G& g, const typename G::State& s, int a) {
  { G::kDim } -> std::convertible_to<int>;
  { g.num_leader_actions() } -> std::convertible_to<int>;
  { g.num_follower_actions() } -> std::convertible_to<int>;
  { g.step(s, a, a) } -> std::convertible_to<typename G::State>;
  { g.reward_A(s, a, a) } -> std::convertible_to<double>;
  { g.reward_H(s, a, a) } -> std::convertible_to<double>;
  { g.model() } -> std::convertible_to<ModelTag>;
  { g.leader_tuples() } -> std::convertible_to<ActionTuples>;
  { g.follower_tuples() } -> std::convertible_to<ActionTuples>;
  { g.reward_hash() } -> std::convertible_to<std::array<std::uint8_t, 32>>;
};

// Highway game over (x_rel, y_A, v_rel) with the human held in the left lane.
class Highway3dGame {
 public:
  static constexpr int kDim = 3;
  using State = Eigen::Matrix<double, 3, 1>;

  Highway3dGame(ActionGrid actions, RewardConfig rewards, double alpha, double dk);

  int num_leader_actions() const { return static_cast<int>(actions_.leader.size()); }
  int num_follower_actions() const { return static_cast<int>(actions_.follower.size()); }
  State step(const State& s, int a, int h) const;
  double reward_A(const State& s, int a, int h) const;
  double reward_H(const State& s, int a, int h) const;
  ModelTag model() const { return ModelTag::k3d; }
  ActionTuples leader_tuples() const;
  ActionTuples follower_tuples() const;
  std::array<std::uint8_t, 32> reward_hash() const { return rewards_.hash(); }

 private:
  ActionGrid actions_;
  RewardConfig rewards_;
  double alpha_;
  double dk_;
};

// Highway game over (x_rel, y_A, y_H, v_rel); the human also picks w_H.
class Highway4dGame {
 public:
  static constexpr int kDim = 4;
  using State = Eigen::Matrix<double, 4, 1>;

  Highway4dGame(ActionGrid actions, RewardConfig rewards, double alpha, double dk);

  int num_leader_actions() const { return static_cast<int>(actions_.leader.size()); }
  int num_follower_actions() const { return static_cast<int>(actions_.follower.size()); }
  State step(const State& s, int a, int h) const;
  double reward_A(const State& s, int a, int h) const;
  double reward_H(const State& s, int a, int h) const;
  ModelTag model() const { return ModelTag::k4d; }
  ActionTuples leader_tuples() const;
  ActionTuples follower_tuples() const;
  std::array<std::uint8_t, 32> reward_hash() const { return rewards_.hash(); }

 private:
  ActionGrid actions_;
  RewardConfig rewards_;
  double alpha_;
  double dk_;
};

// Game given by callables; used for small hand-built games.
template <int Dim>
struct FunctionGame {
  static constexpr int kDim = Dim;
  using State = Eigen::Matrix<double, Dim, 1>;

  int leader_count = 1;
  int follower_count = 1;
  std::function<State(const State&, int, int)> transition;
  std::function<double(const State&, int, int)> leader_reward;
  std::function<double(const State&, int, int)> follower_reward;

  int num_leader_actions() const { return leader_count; }
  int num_follower_actions() const { return follower_count; }
  State step(const State& s, int a, int h) const { return transition(s, a, h); }
  double reward_A(const State& s, int a, int h) const { return leader_reward(s, a, h); }
  double reward_H(const State& s, int a, int h) const { return follower_reward(s, a, h); }
  ModelTag model() const { return ModelTag::kGeneric; }
  ActionTuples leader_tuples() const { return index_tuples(leader_count); }
  ActionTuples follower_tuples() const { return index_tuples(follower_count); }
  std::array<std::uint8_t, 32> reward_hash() const { return {}; }

 private:
  static ActionTuples index_tuples(int n) {
    ActionTuples t;
    for (int i = 0; i < n; ++i) t.values.push_back(i);
    return t;
  }
};

namespace detail {

unsigned resolve_threads(unsigned requested);

// Runs body(begin, end) over [0, n) split into contiguous chunks, one per
// thread. The first exception thrown by any chunk is rethrown.
void parallel_chunks(std::size_t n, unsigned threads,
                     const std::function<void(std::size_t, std::size_t)>& body);

// Per-cell work buffers reused across the sweep.
struct CellScratch {
  std::vector<double> q_H;
  std::vector<double> r_A;
  std::vector<double> prob;
};

}  // namespace detail

// Feedback Stackelberg dynamic program with a Boltzmann follower, swept
// backward from stage K to 0. Successor values are read by multilinear
// interpolation with successors clamped to the grid. The leader maximizes the
// follower-expected return; ties go to the lowest action index. Identical
// inputs give bit-identical tables for any thread count.
template <StrategicGame Game>
ValueTable solve(const Game& game, const GridSpec& grid, const SolverParams& params) {
  grid.validate();
  params.validate();
  if (grid.dims() != Game::kDim) {
    throw DimensionError("solve: grid has " + std::to_string(grid.dims()) +
                         " axes, game state has " + std::to_string(Game::kDim));
  }
  if (grid.K != params.K || grid.dk != params.dk) {
    throw ConfigError("solve: grid K/dk disagree with solver params");
  }
  const int n_lead = game.num_leader_actions();
  const int n_follow = game.num_follower_actions();
  if (n_lead <= 0 || n_follow <= 0) throw ConfigError("solve: empty action set");
  if (n_lead > std::numeric_limits<std::uint16_t>::max()) {
    throw ConfigError("solve: too many leader actions for u16 policy indices");
  }

  ValueTable table;
  table.grid = grid;
  table.model = game.model();
  table.beta = params.beta;
  table.alpha = params.alpha;
  table.leader_actions = game.leader_tuples();
  table.follower_actions = game.follower_tuples();
  table.reward_hash = game.reward_hash();

  const auto cells = static_cast<Eigen::Index>(grid.cell_count());
  table.value_A.setZero(cells, params.K + 1);
  table.value_H.setZero(cells, params.K + 1);
  table.policy.setZero(cells, params.K + 1);

  const std::vector<std::size_t> strides = grid.strides();
  const std::vector<double> zeros(static_cast<std::size_t>(cells), 0.0);
  const unsigned threads = detail::resolve_threads(params.threads);

  for (int k = params.K; k >= 0; --k) {
    const bool terminal_next = (k == params.K);
    const double* next_A = terminal_next ? zeros.data() : table.value_A.col(k + 1).data();
    const double* next_H = terminal_next ? zeros.data() : table.value_H.col(k + 1).data();
    double* out_A = table.value_A.col(k).data();
    double* out_H = table.value_H.col(k).data();
    std::uint16_t* out_policy = table.policy.col(k).data();

    detail::parallel_chunks(
        static_cast<std::size_t>(cells), threads, [&](std::size_t begin, std::size_t end) {
          detail::CellScratch scratch;
          scratch.q_H.resize(n_follow);
          scratch.r_A.resize(n_follow);
          scratch.prob.resize(n_follow);
          typename Game::State s;
          for (std::size_t cell = begin; cell < end; ++cell) {
            std::size_t rem = cell;
            for (int d = Game::kDim - 1; d >= 0; --d) {
              const auto n = static_cast<std::size_t>(grid.axes[d].count);
              s[d] = grid.axes[d].node(static_cast<int>(rem % n));
              rem /= n;
            }
            double best_A = -std::numeric_limits<double>::infinity();
            double best_H = 0.0;
            int best_a = 0;
            for (int a = 0; a < n_lead; ++a) {
              for (int h = 0; h < n_follow; ++h) {
                const typename Game::State next = game.step(s, a, h);
                const Stencil<Game::kDim> st =
                    make_stencil<Game::kDim>(grid, strides.data(), next.data());
                const double rA = game.reward_A(s, a, h);
                const double rH = game.reward_H(s, a, h);
                if (!std::isfinite(rA) || !std::isfinite(rH)) {
                  std::ostringstream msg;
                  msg << "solve: non-finite reward at stage " << k << ", cell " << cell
                      << " (state " << s.transpose() << "), leader action " << a
                      << ", follower action " << h;
                  throw NumericalError(msg.str());
                }
                scratch.q_H[h] = rH + st.apply(next_H);
                scratch.r_A[h] = rA + st.apply(next_A);
              }
              detail::boltzmann_into(scratch.q_H, params.beta, scratch.prob);
              double q_star_H = 0.0;
              double q_A = 0.0;
              for (int h = 0; h < n_follow; ++h) {
                q_star_H += scratch.prob[h] * scratch.q_H[h];
                q_A += scratch.prob[h] * scratch.r_A[h];
              }
              if (q_A > best_A) {
                best_A = q_A;
                best_H = q_star_H;
                best_a = a;
              }
            }
            out_A[cell] = best_A;
            out_H[cell] = best_H;
            out_policy[cell] = static_cast<std::uint16_t>(best_a);
          }
        });
  }
  return table;
}

// Builds the 3-D or 4-D highway game and solves it on `grid`.
ValueTable solve_highway(ModelTag model, const GridSpec& grid, const ActionGrid& actions,
                         const RewardConfig& rewards, const SolverParams& params);

}  // namespace hgp
