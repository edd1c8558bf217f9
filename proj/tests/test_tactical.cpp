#include <cmath>
#include <memory>
#include <random>

#include <Eigen/LU>

#include "doctest.h"
#include "hgp/errors.hpp"
#include "hgp/tactical_planner.hpp"

using namespace hgp;

namespace {

RewardConfig zero_weights() {
  RewardConfig cfg;
  cfg.weights = RewardWeights{0, 0, 0, 0, 0, 0, 0};
  return cfg;
}

JointState merge_state() {
  JointState x;
  x.av = {-6, 1.85, 0, 32};
  x.human = {0, 5.55, 0, 30};
  return x;
}

ControlSequence random_controls(std::mt19937_64& rng, int M) {
  std::uniform_real_distribution<double> steer(-0.5, 0.5);
  std::uniform_real_distribution<double> accel(-8.0, 4.0);
  ControlSequence u(2, M);
  for (int t = 0; t < M; ++t) {
    u(0, t) = 0.1 * steer(rng);
    u(1, t) = accel(rng);
  }
  return u;
}

std::shared_ptr<ValueTable> random_3d_table(unsigned seed) {
  auto t = std::make_shared<ValueTable>();
  t->grid.axes = {Axis{"x_rel", -40, 40, 17}, Axis{"y_A", 0, 7.4, 9},
                  Axis{"v_rel", -10, 10, 11}};
  t->grid.K = 0;
  t->model = ModelTag::k3d;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  const auto cells = static_cast<Eigen::Index>(t->grid.cell_count());
  t->value_A.resize(cells, 1);
  t->value_H.resize(cells, 1);
  for (Eigen::Index i = 0; i < cells; ++i) {
    t->value_A(i, 0) = u(rng);
    t->value_H(i, 0) = u(rng);
  }
  t->policy = PolicyMatrix::Zero(cells, 1);
  return t;
}

double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-8);
}

}  // namespace

TEST_SUITE("tactical") {

TEST_CASE("objective examples") {
  const JointState x = merge_state();
  const ControlSequence z = ControlSequence::Zero(2, 5);
  MoverModel m;
  m.rewards = zero_weights();
  CHECK(objective(x, z, z, Player::kA, m, 0.1) == 0.0);

  // Lane-center only: a straight car on its lane center earns the weight each step.
  m.rewards.weights.lane_center = 1.75;
  CHECK(objective(x, z, z, Player::kA, m, 0.1) == doctest::Approx(5 * 1.75).epsilon(1e-12));
  CHECK(objective(x, z, z, Player::kH, m, 0.1) == doctest::Approx(5 * 1.75).epsilon(1e-12));

  m.rewards = zero_weights();
  auto seven = random_3d_table(1);
  seven->value_A.setConstant(7.0);
  m.value = seven;
  CHECK(objective(x, z, z, Player::kA, m, 0.1) == doctest::Approx(7.0).epsilon(1e-12));

  CHECK_THROWS_AS(objective(x, z, ControlSequence::Zero(2, 4), Player::kA, m, 0.1),
                  DimensionError);
}

TEST_CASE("autodiff gradient matches central differences") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MoverModel plain;
  MoverModel valued;
  valued.value = random_3d_table(2);
  for (int i = 0; i < 100; ++i) {
    JointState x;
    x.av = {10 * u(rng), 3.7 + 2 * u(rng), 0.05 * u(rng), 31 + 3 * u(rng)};
    x.human = {10 * u(rng), 3.7 + 2 * u(rng), 0.05 * u(rng), 30 + 3 * u(rng)};
    const ControlSequence uA = random_controls(rng, 5);
    const ControlSequence uH = random_controls(rng, 5);
    for (const MoverModel* m : {&plain, &valued}) {
      for (Player who : {Player::kA, Player::kH}) {
        const Eigen::VectorXd ad =
            objective_gradient(x, uA, uH, who, *m, 0.1, GradientMode::kAutoDiff);
        const Eigen::VectorXd fd =
            objective_gradient(x, uA, uH, who, *m, 0.1, GradientMode::kFiniteDifference, 1e-5);
        CHECK(relative_error(ad, fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("rollout satisfies the state recursion") {
  std::mt19937_64 rng(22);
  const JointState x = merge_state();
  const ControlSequence uA = random_controls(rng, 8);
  const ControlSequence uH = random_controls(rng, 8);
  const Trajectory tr = rollout(x, uA, uH, 0.1);
  REQUIRE(tr.states.size() == 9);
  for (int t = 0; t < 8; ++t) {
    const JointState n =
        step_joint(tr.states[t], {uA(0, t), uA(1, t)}, {uH(0, t), uH(1, t)}, 0.1);
    CHECK(n.av.x == tr.states[t + 1].av.x);
    CHECK(n.av.y == tr.states[t + 1].av.y);
    CHECK(n.human.v == tr.states[t + 1].human.v);
    CHECK(n.human.psi == tr.states[t + 1].human.psi);
  }
}

TEST_CASE("optimizer finds a quadratic maximum") {
  BoxObjective f;
  f.value = [](const Eigen::VectorXd& z) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < z.size(); i += 2) {
      v -= 3.0 * z[i] * z[i] + (z[i + 1] - 1.0) * (z[i + 1] - 1.0);
    }
    return v;
  };
  f.gradient = [](const Eigen::VectorXd& z) {
    Eigen::VectorXd g(z.size());
    for (Eigen::Index i = 0; i < z.size(); i += 2) {
      g[i] = -6.0 * z[i];
      g[i + 1] = -2.0 * (z[i + 1] - 1.0);
    }
    return g;
  };
  OptimizerOptions opt;
  opt.max_iterations = 100;
  ControlSequence init = ControlSequence::Zero(2, 5);
  init.row(0).setConstant(0.3);
  init.row(1).setConstant(-6.0);
  const OptimizeResult r = maximize_controls(f, init, opt);
  CHECK(r.controls.row(0).cwiseAbs().maxCoeff() < 1e-3);
  CHECK((r.controls.row(1).array() - 1.0).abs().maxCoeff() < 1e-3);
  CHECK(r.objective >= r.initial_objective);

  ControlSequence optimal = ControlSequence::Zero(2, 5);
  optimal.row(1).setConstant(1.0);
  const OptimizeResult again = maximize_controls(f, optimal, opt);
  CHECK(again.iterations <= 2);
  CHECK(std::abs(again.objective - again.initial_objective) < 1e-9);
}

TEST_CASE("optimizer pins a saturated bound") {
  BoxObjective f;
  f.value = [](const Eigen::VectorXd& z) {
    double v = 0.0;
    for (Eigen::Index i = 1; i < z.size(); i += 2) v += z[i];
    return v;
  };
  f.gradient = [](const Eigen::VectorXd& z) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(z.size());
    for (Eigen::Index i = 1; i < z.size(); i += 2) g[i] = 1.0;
    return g;
  };
  const OptimizeResult r = maximize_controls(f, ControlSequence::Zero(2, 5), {});
  CHECK((r.controls.row(1).array() == VehicleLimits::kAccelMax).all());
}

TEST_CASE("speed-seeking car accelerates at the limit") {
  MoverModel m;
  m.rewards = zero_weights();
  m.rewards.weights.target_speed = 1.0;
  m.rewards.target_speed_av = 60.0;
  const JointState x = merge_state();
  const ControlSequence z = ControlSequence::Zero(2, 5);
  const OptimizeResult r = optimize_own(x, z, Player::kA, m, 0.1, z, {});
  // The last control only affects the state after the horizon.
  CHECK(r.controls.row(1).head(4).minCoeff() > VehicleLimits::kAccelMax - 1e-9);
  CHECK(r.controls(1, 4) == 0.0);
}

TEST_CASE("accepted steps never lower the objective") {
  std::mt19937_64 rng(23);
  const RewardConfig cfg;
  MoverModel m;
  m.rewards = cfg;
  for (int i = 0; i < 20; ++i) {
    const JointState x = merge_state();
    const ControlSequence other = random_controls(rng, 5);
    const ControlSequence init = random_controls(rng, 5);
    for (Player who : {Player::kA, Player::kH}) {
      const OptimizeResult r = optimize_own(x, other, who, m, 0.1, init, {});
      CHECK(r.objective >= r.initial_objective);
      const double direct = who == Player::kA
                                ? objective(x, r.controls, other, who, m, 0.1)
                                : objective(x, other, r.controls, who, m, 0.1);
      CHECK(direct == doctest::Approx(r.objective).epsilon(1e-12));
    }
  }
}

TEST_CASE("planner converges and respects bounds") {
  PlannerConfig pc;
  TacticalPlanner planner(pc);
  const PlanResult r = planner.plan(merge_state());
  CHECK(r.controls_A.cols() == 5);
  CHECK(r.controls_A.row(0).cwiseAbs().maxCoeff() <= VehicleLimits::kSteerMax);
  CHECK(r.controls_A.row(1).maxCoeff() <= VehicleLimits::kAccelMax);
  CHECK(r.controls_A.row(1).minCoeff() >= VehicleLimits::kAccelMin);
  CHECK(r.controls_H.row(1).minCoeff() >= VehicleLimits::kAccelMin);
  CHECK(r.rounds >= 1);
  CHECK(r.rounds <= pc.max_rounds);
}

TEST_CASE("planner is deterministic") {
  PlannerConfig pc;
  TacticalPlanner a(pc), b(pc);
  JointState x = merge_state();
  for (int i = 0; i < 5; ++i) {
    const PlanResult ra = a.plan(x);
    const PlanResult rb = b.plan(x);
    CHECK(ra.controls_A == rb.controls_A);
    CHECK(ra.controls_H == rb.controls_H);
    x = step_joint(x, {ra.controls_A(0, 0), ra.controls_A(1, 0)},
                   {ra.controls_H(0, 0), ra.controls_H(1, 0)}, 0.1);
  }
}

TEST_CASE("planner configuration errors") {
  PlannerConfig pc;
  pc.M = 0;
  CHECK_THROWS_AS(TacticalPlanner{pc}, ConfigError);
  pc = PlannerConfig{};
  pc.dt = 0.0;
  CHECK_THROWS_AS(TacticalPlanner{pc}, ConfigError);
  pc = PlannerConfig{};
  TacticalPlanner p(pc);
  CHECK_THROWS_AS(p.plan_with_influence(merge_state()), ConfigError);
  CHECK_THROWS_AS(p.set_warm_start(ControlSequence::Zero(2, 3), ControlSequence::Zero(2, 5)),
                  DimensionError);
  JointState bad = merge_state();
  bad.av.v = std::nan("");
  CHECK_THROWS_AS(p.plan(bad), InvalidStateError);
}

TEST_CASE("influence vanishes when the human ignores the AV") {
  PlannerConfig pc;
  pc.rewards.weights.collision_avoidance = 0.0;
  pc.influence_term = true;
  const JointState x = merge_state();
  TacticalPlanner with(pc), without(pc);
  const PlanResult a = with.plan_with_influence(x);
  const PlanResult b = without.plan(x);
  CHECK(!a.influence_fallback);
  CHECK((a.controls_A - b.controls_A).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((a.controls_H - b.controls_H).cwiseAbs().maxCoeff() < 1e-6);
  const auto J = human_response_jacobian(x, a.controls_A, a.controls_H,
                                         pc.mover(Player::kH), pc.dt);
  REQUIRE(J.has_value());
  CHECK(J->cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("response jacobian predicts the re-optimized human") {
  // Human 12 m behind the AV in the same lane, so her response is coupled.
  JointState x;
  x.av = {12, 5.55, 0, 30};
  x.human = {0, 5.55, 0, 30};
  MoverModel human;
  human.rewards = RewardConfig{};
  ControlSequence uA = ControlSequence::Zero(2, 5);
  uA.row(1).setConstant(-1.0);

  // Stationary point of her objective by Newton steps on the gradient; the
  // objective itself is too flat near the optimum to resolve small shifts.
  auto stationary = [&](const ControlSequence& a, ControlSequence h) {
    for (int it = 0; it < 30; ++it) {
      const Eigen::VectorXd g = objective_gradient(x, a, h, Player::kH, human, 0.1);
      if (g.lpNorm<Eigen::Infinity>() < 1e-11) break;
      Eigen::MatrixXd H(g.size(), g.size());
      for (Eigen::Index j = 0; j < g.size(); ++j) {
        ControlSequence p = h, m = h;
        p.data()[j] += 1e-5;
        m.data()[j] -= 1e-5;
        H.col(j) = (objective_gradient(x, a, p, Player::kH, human, 0.1) -
                    objective_gradient(x, a, m, Player::kH, human, 0.1)) /
                   2e-5;
      }
      const Eigen::VectorXd step = H.partialPivLu().solve(-g);
      h = h + Eigen::Map<const ControlSequence>(step.data(), 2, h.cols());
    }
    return h;
  };
  const ControlSequence start =
      optimize_own(x, uA, Player::kH, human, 0.1, ControlSequence::Zero(2, 5), {}).controls;
  const ControlSequence uH = stationary(uA, start);
  REQUIRE(objective_gradient(x, uA, uH, Player::kH, human, 0.1).lpNorm<Eigen::Infinity>() <
          1e-9);
  REQUIRE(uH.row(1).minCoeff() > VehicleLimits::kAccelMin + 0.1);  // interior optimum
  REQUIRE(uH.row(1).maxCoeff() < VehicleLimits::kAccelMax - 0.1);
  REQUIRE(uH.row(0).cwiseAbs().maxCoeff() < VehicleLimits::kSteerMax - 0.1);
  const auto J = human_response_jacobian(x, uA, uH, human, 0.1);
  REQUIRE(J.has_value());

  const double h = 1e-3;
  for (Eigen::Index j : {0, 1, 3, 6}) {
    ControlSequence up = uA, down = uA;
    up.data()[j] += h;
    down.data()[j] -= h;
    const ControlSequence hu = stationary(up, uH);
    const ControlSequence hd = stationary(down, uH);
    const Eigen::VectorXd fd =
        (Eigen::Map<const Eigen::VectorXd>(hu.data(), hu.size()) -
         Eigen::Map<const Eigen::VectorXd>(hd.data(), hd.size())) /
        (2 * h);
    INFO("column ", j, " fd ", fd.transpose(), " J ", J->col(j).transpose());
    CHECK((fd - J->col(j)).norm() <= 1e-3 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("multi-start keeps the best candidate") {
  PlannerConfig pc;
  const JointState x = merge_state();
  const auto inits = diverse_initializations(pc.M);
  REQUIRE(inits.size() == 3);
  CHECK((inits[0].row(0).array() == VehicleLimits::kSteerMax).all());
  CHECK((inits[1].row(0).array() == -VehicleLimits::kSteerMax).all());
  CHECK(inits[2].isZero());

  double best = -1e300;
  for (const auto& a : inits) {
    for (const auto& h : inits) {
      TacticalPlanner single(pc);
      single.set_warm_start(a, h);
      best = std::max(best, single.plan(x).objective);
    }
  }
  TacticalPlanner multi(pc);
  const PlanResult r = multi.plan_multistart(x, inits, inits);
  CHECK(r.objective == best);

  TacticalPlanner lh(pc);
  CHECK(plan_long_horizon(lh, x).objective == best);
}

TEST_CASE("convex toy converges to one optimum from every start") {
  PlannerConfig pc;
  pc.rewards = zero_weights();
  pc.rewards.weights.control_effort = 1.0;
  pc.rewards.weights.target_speed = 0.1;
  pc.rewards.weights.road_bounds = 0.0;
  pc.inner.max_iterations = 200;
  pc.inner.gradient_tolerance = 1e-9;
  const JointState x = merge_state();
  std::vector<ControlSequence> results;
  for (const auto& a : diverse_initializations(pc.M)) {
    TacticalPlanner p(pc);
    p.set_warm_start(a, a);
    results.push_back(p.plan(x).controls_A);
  }
  for (const auto& r : results) CHECK((r - results[0]).cwiseAbs().maxCoeff() < 1e-4);
}

}  // TEST_SUITE
