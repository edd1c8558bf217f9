#include "hgp/tactical_planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "hgp/errors.hpp"

namespace hgp {

namespace {

constexpr double kBoundEps = 1e-12;

double lower_bound(Eigen::Index i) {
  return i % 2 == 0 ? -VehicleLimits::kSteerMax : VehicleLimits::kAccelMin;
}
double upper_bound(Eigen::Index i) {
  return i % 2 == 0 ? VehicleLimits::kSteerMax : VehicleLimits::kAccelMax;
}

Eigen::VectorXd project(Eigen::VectorXd z) {
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = std::clamp(z[i], lower_bound(i), upper_bound(i));
  return z;
}

Eigen::VectorXd flatten(const ControlSequence& u) {
  return Eigen::Map<const Eigen::VectorXd>(u.data(), u.size());
}

ControlSequence unflatten(const Eigen::VectorXd& z) {
  return Eigen::Map<const ControlSequence>(z.data(), 2, z.size() / 2);
}

// Constants carry zero derivative vectors of the full size: Eigen's
// AutoDiffScalar products do not reconcile empty and sized derivatives.
template <typename T>
T constant(double v, Eigen::Index n) {
  if constexpr (std::is_same_v<T, double>) {
    return v;
  } else {
    return T(v, Eigen::VectorXd::Zero(n));
  }
}

template <typename T>
JointStateT<T> cast_state(const JointState& x, Eigen::Index n) {
  JointStateT<T> out;
  out.av = {constant<T>(x.av.x, n), constant<T>(x.av.y, n), constant<T>(x.av.psi, n),
            constant<T>(x.av.v, n)};
  out.human = {constant<T>(x.human.x, n), constant<T>(x.human.y, n),
               constant<T>(x.human.psi, n), constant<T>(x.human.v, n)};
  out.t = x.t;
  return out;
}

template <typename T>
using Controls = std::vector<VehicleControlT<T>>;

template <typename T>
Controls<T> constant_controls(const ControlSequence& u, Eigen::Index n = 0) {
  Controls<T> out(u.cols());
  for (Eigen::Index t = 0; t < u.cols(); ++t) {
    out[t] = {constant<T>(u(0, t), n), constant<T>(u(1, t), n)};
  }
  return out;
}

// Strategic value at the projected terminal state. With AutoDiff scalars the
// derivative is chained through the interpolant's gradient.
template <typename T>
T terminal_value(const JointStateT<T>& x, const MoverModel& m, Player who) {
  const ValueTable& table = *m.value;
  std::vector<T> p;
  p.push_back(x.av.x - x.human.x);
  p.push_back(x.av.y);
  if (table.model == ModelTag::k4d) p.push_back(x.human.y);
  p.push_back(relative_speed(x.av, x.human));
  if (table.model == ModelTag::kGeneric) {
    throw DimensionError("planner: value table must be a 3d or 4d highway table");
  }
  std::vector<double> raw(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) raw[i] = value_of(p[i]);
  Eigen::VectorXd g;
  const double v = table.lookup_with_gradient(raw, m.value_stage, who, g);
  if constexpr (std::is_same_v<T, double>) {
    return m.value_weight * v;
  } else {
    T out(m.value_weight * v);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i].derivatives().size() == 0 || g[i] == 0.0) continue;
      if (out.derivatives().size() == 0) out.derivatives().setZero(p[i].derivatives().size());
      out.derivatives() += (m.value_weight * g[i]) * p[i].derivatives();
    }
    return out;
  }
}

template <typename T>
Eigen::Index derivative_size(const Controls<T>& uA, const Controls<T>& uH) {
  if constexpr (std::is_same_v<T, double>) {
    return 0;
  } else {
    Eigen::Index n = 0;
    for (const auto& u : uA) n = std::max({n, u.steer.derivatives().size(), u.accel.derivatives().size()});
    for (const auto& u : uH) n = std::max({n, u.steer.derivatives().size(), u.accel.derivatives().size()});
    return n;
  }
}

template <typename T>
T objective_impl(const JointState& x0, const Controls<T>& uA, const Controls<T>& uH,
                 Player who, const MoverModel& m, double dt) {
  const Eigen::Index n = derivative_size(uA, uH);
  JointStateT<T> x = cast_state<T>(x0, n);
  T total = constant<T>(0.0, n);
  for (std::size_t t = 0; t < uA.size(); ++t) {
    total = total + (who == Player::kA ? tactical_reward_A(x, uA[t], uH[t], m.rewards)
                                       : tactical_reward_H(x, uH[t], uA[t], m.rewards));
    JointStateT<T> next;
    next.av = detail::integrate_bicycle(x.av, uA[t], dt);
    next.human = detail::integrate_bicycle(x.human, uH[t], dt);
    next.t = x.t + dt;
    x = next;
  }
  if (m.value) total = total + terminal_value(x, m, who);
  return total;
}

Controls<AutoDiffXd> seeded_controls(const ControlSequence& u) {
  const Eigen::Index n = u.size();
  Controls<AutoDiffXd> out(u.cols());
  for (Eigen::Index t = 0; t < u.cols(); ++t) {
    out[t].steer = AutoDiffXd(u(0, t), n, 2 * t);
    out[t].accel = AutoDiffXd(u(1, t), n, 2 * t + 1);
  }
  return out;
}

void check_lengths(const ControlSequence& uA, const ControlSequence& uH) {
  if (uA.cols() != uH.cols() || uA.cols() == 0) {
    throw DimensionError("planner: control sequences must have equal, nonzero length (got " +
                         std::to_string(uA.cols()) + " and " + std::to_string(uH.cols()) +
                         ")");
  }
}

Eigen::VectorXd autodiff_gradient(const JointState& x0, const ControlSequence& uA,
                                  const ControlSequence& uH, Player who,
                                  const MoverModel& m, double dt) {
  const ControlSequence& mine = who == Player::kA ? uA : uH;
  const Controls<AutoDiffXd> seeded = seeded_controls(mine);
  const Controls<AutoDiffXd> fixed =
      constant_controls<AutoDiffXd>(who == Player::kA ? uH : uA, mine.size());
  const AutoDiffXd f = who == Player::kA ? objective_impl(x0, seeded, fixed, who, m, dt)
                                         : objective_impl(x0, fixed, seeded, who, m, dt);
  Eigen::VectorXd g = f.derivatives();
  if (g.size() == 0) g.setZero(mine.size());
  return g;
}

}  // namespace

Trajectory rollout(const JointState& x0, const ControlSequence& uA,
                   const ControlSequence& uH, double dt) {
  check_lengths(uA, uH);
  Trajectory traj;
  traj.controls_A = uA;
  traj.controls_H = uH;
  traj.dt = dt;
  traj.states.reserve(uA.cols() + 1);
  traj.states.push_back(x0);
  for (Eigen::Index t = 0; t < uA.cols(); ++t) {
    traj.states.push_back(step_joint(traj.states.back(), {uA(0, t), uA(1, t)},
                                     {uH(0, t), uH(1, t)}, dt));
  }
  return traj;
}

void PlannerConfig::validate() const {
  if (M < 1) throw ConfigError("planner.M must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("planner.dt must be > 0");
  if (max_rounds < 1) throw ConfigError("planner.max_rounds must be >= 1");
  if (!(round_tolerance > 0.0)) throw ConfigError("planner.round_tolerance must be > 0");
  if (inner.max_iterations < 1) throw ConfigError("planner.inner.max_iterations must be >= 1");
  if (!(inner.gradient_tolerance > 0.0) || !(inner.step_tolerance > 0.0)) {
    throw ConfigError("planner.inner tolerances must be > 0");
  }
  rewards.validate();
}

MoverModel PlannerConfig::mover(Player who) const {
  MoverModel m;
  m.rewards = rewards;
  m.value_stage = value_stage;
  m.value_weight = value_weight;
  if (use_value) m.value = who == Player::kA ? av_value : human_value;
  return m;
}

double objective(const JointState& x0, const ControlSequence& uA,
                 const ControlSequence& uH, Player who, const MoverModel& model,
                 double dt) {
  check_lengths(uA, uH);
  return objective_impl(x0, constant_controls<double>(uA), constant_controls<double>(uH),
                        who, model, dt);
}

Eigen::VectorXd objective_gradient(const JointState& x0, const ControlSequence& uA,
                                   const ControlSequence& uH, Player who,
                                   const MoverModel& model, double dt, GradientMode mode,
                                   double fd_step) {
  check_lengths(uA, uH);
  if (mode == GradientMode::kAutoDiff) return autodiff_gradient(x0, uA, uH, who, model, dt);
  ControlSequence a = uA;
  ControlSequence h = uH;
  ControlSequence& mine = who == Player::kA ? a : h;
  Eigen::VectorXd g(mine.size());
  for (Eigen::Index i = 0; i < mine.size(); ++i) {
    const double orig = mine.data()[i];
    mine.data()[i] = orig + fd_step;
    const double up = objective(x0, a, h, who, model, dt);
    mine.data()[i] = orig - fd_step;
    const double down = objective(x0, a, h, who, model, dt);
    mine.data()[i] = orig;
    g[i] = (up - down) / (2.0 * fd_step);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Projected BFGS on the control box.

OptimizeResult maximize_controls(const BoxObjective& f, const ControlSequence& init,
                                 const OptimizerOptions& options) {
  const Eigen::Index n = init.size();
  Eigen::VectorXd z = project(flatten(init));
  double fz = f.value(z);
  if (!std::isfinite(fz)) throw NumericalError("optimizer: non-finite objective at initialization");
  Eigen::VectorXd g = f.gradient(z);

  // Initial inverse-Hessian guess scaled to the control ranges.
  Eigen::VectorXd scale(n);
  for (Eigen::Index i = 0; i < n; ++i) scale[i] = i % 2 == 0 ? 1e-3 : 1e-1;
  Eigen::MatrixXd H = scale.asDiagonal();
  bool fresh = true;

  OptimizeResult result;
  result.initial_objective = fz;
  constexpr double kArmijo = 1e-4;
  for (int it = 0; it < options.max_iterations; ++it) {
    // Variables pinned at a bound with the gradient pushing outward are held.
    Eigen::VectorXd free = Eigen::VectorXd::Ones(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((z[i] <= lower_bound(i) + kBoundEps && g[i] < 0.0) ||
          (z[i] >= upper_bound(i) - kBoundEps && g[i] > 0.0)) {
        free[i] = 0.0;
      }
    }
    const Eigen::VectorXd pg = g.cwiseProduct(free);
    if (pg.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      result.converged = true;
      break;
    }
    result.iterations = it + 1;

    bool accepted = false;
    Eigen::VectorXd z_new;
    double f_new = fz;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      Eigen::VectorXd d = free.asDiagonal() * (H * pg);
      if (pg.dot(d) <= 0.0) {
        H = scale.asDiagonal();
        fresh = true;
        d = free.asDiagonal() * (H * pg);
      }
      double step = 1.0;
      for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
        z_new = project(z + step * d);
        f_new = f.value(z_new);
        if (!std::isfinite(f_new)) {
          std::ostringstream msg;
          msg << "optimizer: non-finite objective in line search (iteration " << it
              << ", step " << step << ")";
          throw NumericalError(msg.str());
        }
        if (f_new >= fz + kArmijo * g.dot(z_new - z) && f_new > fz) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        if (fresh) break;
        H = scale.asDiagonal();
        fresh = true;
      }
    }
    if (!accepted) break;

    const Eigen::VectorXd s = z_new - z;
    const Eigen::VectorXd g_new = f.gradient(z_new);
    z = z_new;
    fz = f_new;
    if (s.lpNorm<Eigen::Infinity>() < options.step_tolerance) {
      g = g_new;
      result.converged = true;
      break;
    }
    // BFGS update for the minimization of -f.
    const Eigen::VectorXd y = g - g_new;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) {
        H = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(n, n);
        fresh = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
    g = g_new;
  }
  result.controls = unflatten(z);
  result.objective = fz;
  return result;
}

OptimizeResult optimize_own(const JointState& x0, const ControlSequence& fixed_other,
                            Player who, const MoverModel& model, double dt,
                            const ControlSequence& init, const OptimizerOptions& options) {
  if (init.cols() != fixed_other.cols()) {
    throw DimensionError("optimize_own: initialization and fixed controls differ in length");
  }
  BoxObjective f;
  f.value = [&](const Eigen::VectorXd& z) {
    const ControlSequence mine = unflatten(z);
    return who == Player::kA ? objective(x0, mine, fixed_other, who, model, dt)
                             : objective(x0, fixed_other, mine, who, model, dt);
  };
  f.gradient = [&](const Eigen::VectorXd& z) {
    const ControlSequence mine = unflatten(z);
    return who == Player::kA
               ? objective_gradient(x0, mine, fixed_other, who, model, dt, options.gradient,
                                    options.fd_step)
               : objective_gradient(x0, fixed_other, mine, who, model, dt, options.gradient,
                                    options.fd_step);
  };
  return maximize_controls(f, init, options);
}

// ---------------------------------------------------------------------------
// Influence term

std::optional<Eigen::MatrixXd> human_response_jacobian(const JointState& x0,
                                                       const ControlSequence& uA,
                                                       const ControlSequence& uH,
                                                       const MoverModel& human, double dt,
                                                       double fd_step) {
  check_lengths(uA, uH);
  const Eigen::Index n = uH.size();
  auto grad = [&](const ControlSequence& a, const ControlSequence& h) {
    return autodiff_gradient(x0, a, h, Player::kH, human, dt);
  };
  Eigen::MatrixXd H_hh(n, n);
  Eigen::MatrixXd H_ha(n, uA.size());
  ControlSequence h = uH;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double orig = h.data()[j];
    h.data()[j] = orig + fd_step;
    const Eigen::VectorXd up = grad(uA, h);
    h.data()[j] = orig - fd_step;
    const Eigen::VectorXd down = grad(uA, h);
    h.data()[j] = orig;
    H_hh.col(j) = (up - down) / (2.0 * fd_step);
  }
  ControlSequence a = uA;
  for (Eigen::Index j = 0; j < uA.size(); ++j) {
    const double orig = a.data()[j];
    a.data()[j] = orig + fd_step;
    const Eigen::VectorXd up = grad(a, uH);
    a.data()[j] = orig - fd_step;
    const Eigen::VectorXd down = grad(a, uH);
    a.data()[j] = orig;
    H_ha.col(j) = (up - down) / (2.0 * fd_step);
  }

  // Controls resting on a bound stay there to first order.
  std::vector<Eigen::Index> free_idx;
  const Eigen::VectorXd zh = flatten(uH);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (zh[i] > lower_bound(i) + 1e-9 && zh[i] < upper_bound(i) - 1e-9) free_idx.push_back(i);
  }
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, uA.size());
  if (free_idx.empty()) return J;
  const auto nf = static_cast<Eigen::Index>(free_idx.size());
  Eigen::MatrixXd Hf(nf, nf);
  Eigen::MatrixXd Mf(nf, uA.size());
  for (Eigen::Index r = 0; r < nf; ++r) {
    Mf.row(r) = H_ha.row(free_idx[r]);
    for (Eigen::Index c = 0; c < nf; ++c) Hf(r, c) = H_hh(free_idx[r], free_idx[c]);
  }
  const Eigen::MatrixXd neg = -0.5 * (Hf + Hf.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(neg);
  if (eig.info() != Eigen::Success) return std::nullopt;
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (!(eig.eigenvalues().minCoeff() > 1e-8 * std::max(top, 1.0))) return std::nullopt;
  // H_hh dz_h + H_ha dz_a = 0  =>  dz_h/dz_a = (-H_hh)^{-1} H_ha.
  const Eigen::MatrixXd Jf = neg.ldlt().solve(Mf);
  for (Eigen::Index r = 0; r < nf; ++r) J.row(free_idx[r]) = Jf.row(r);
  return J;
}

namespace {

// AV step against a linearized human response uH0 + J (uA - uA0).
OptimizeResult optimize_av_with_influence(const JointState& x0, const ControlSequence& uA0,
                                          const ControlSequence& uH0, const Eigen::MatrixXd& J,
                                          const MoverModel& av, double dt,
                                          const OptimizerOptions& options) {
  const Eigen::VectorXd zA0 = flatten(uA0);
  const Eigen::VectorXd zH0 = flatten(uH0);
  BoxObjective f;
  f.value = [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd zh = zH0 + J * (z - zA0);
    return objective(x0, unflatten(z), unflatten(zh), Player::kA, av, dt);
  };
  f.gradient = [&](const Eigen::VectorXd& z) {
    const Eigen::Index n = z.size();
    Controls<AutoDiffXd> a(z.size() / 2);
    Controls<AutoDiffXd> h(z.size() / 2);
    const Eigen::VectorXd zh = zH0 + J * (z - zA0);
    for (Eigen::Index t = 0; t < n / 2; ++t) {
      a[t].steer = AutoDiffXd(z[2 * t], n, 2 * t);
      a[t].accel = AutoDiffXd(z[2 * t + 1], n, 2 * t + 1);
      h[t].steer = AutoDiffXd(zh[2 * t], J.row(2 * t).transpose());
      h[t].accel = AutoDiffXd(zh[2 * t + 1], J.row(2 * t + 1).transpose());
    }
    const AutoDiffXd v = objective_impl(x0, a, h, Player::kA, av, dt);
    Eigen::VectorXd g = v.derivatives();
    if (g.size() == 0) g.setZero(n);
    return g;
  };
  return maximize_controls(f, uA0, options);
}

}  // namespace

// ---------------------------------------------------------------------------

TacticalPlanner::TacticalPlanner(PlannerConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  reset();
}

void TacticalPlanner::reset() {
  warm_A_ = ControlSequence::Zero(2, cfg_.M);
  warm_H_ = ControlSequence::Zero(2, cfg_.M);
}

void TacticalPlanner::set_warm_start(const ControlSequence& uA, const ControlSequence& uH) {
  if (uA.cols() != cfg_.M || uH.cols() != cfg_.M) {
    throw DimensionError("planner: warm start must have M columns");
  }
  warm_A_ = uA;
  warm_H_ = uH;
}

void TacticalPlanner::shift_warm_start(const PlanResult& r) {
  const Eigen::Index M = cfg_.M;
  warm_A_.setZero(2, M);
  warm_H_.setZero(2, M);
  if (M > 1) {
    warm_A_.leftCols(M - 1) = r.controls_A.rightCols(M - 1);
    warm_H_.leftCols(M - 1) = r.controls_H.rightCols(M - 1);
  }
}

PlanResult TacticalPlanner::best_response(const JointState& x0, bool influence) {
  if (!is_finite(x0.av) || !is_finite(x0.human)) {
    throw InvalidStateError("planner: non-finite initial state");
  }
  const MoverModel av = cfg_.mover(Player::kA);
  const MoverModel human = cfg_.mover(Player::kH);
  PlanResult r;
  r.controls_A = unflatten(project(flatten(warm_A_)));
  r.controls_H = unflatten(project(flatten(warm_H_)));
  for (int round = 1; round <= cfg_.max_rounds; ++round) {
    r.rounds = round;
    const ControlSequence uH =
        optimize_own(x0, r.controls_A, Player::kH, human, cfg_.dt, r.controls_H, cfg_.inner)
            .controls;
    ControlSequence uA;
    std::optional<Eigen::MatrixXd> J;
    if (influence) J = human_response_jacobian(x0, r.controls_A, uH, human, cfg_.dt);
    if (influence && !J) r.influence_fallback = true;
    if (J) {
      uA = optimize_av_with_influence(x0, r.controls_A, uH, *J, av, cfg_.dt, cfg_.inner)
               .controls;
    } else {
      uA = optimize_own(x0, uH, Player::kA, av, cfg_.dt, r.controls_A, cfg_.inner).controls;
    }
    const double change = std::max((uA - r.controls_A).lpNorm<Eigen::Infinity>(),
                                   (uH - r.controls_H).lpNorm<Eigen::Infinity>());
    r.controls_A = uA;
    r.controls_H = uH;
    if (change < cfg_.round_tolerance) {
      r.converged = true;
      break;
    }
  }
  r.objective = objective(x0, r.controls_A, r.controls_H, Player::kA, av, cfg_.dt);
  return r;
}

PlanResult TacticalPlanner::plan(const JointState& x0) {
  PlanResult r = best_response(x0, false);
  shift_warm_start(r);
  return r;
}

PlanResult TacticalPlanner::plan_with_influence(const JointState& x0) {
  if (!cfg_.influence_term) {
    throw ConfigError("planner.influence_term must be enabled for plan_with_influence");
  }
  PlanResult r = best_response(x0, true);
  shift_warm_start(r);
  return r;
}

PlanResult TacticalPlanner::plan_multistart(const JointState& x0,
                                            const std::vector<ControlSequence>& av_inits,
                                            const std::vector<ControlSequence>& human_inits) {
  if (av_inits.empty() || human_inits.empty()) {
    throw ConfigError("plan_multistart: at least one initialization per player");
  }
  std::optional<PlanResult> best;
  for (const ControlSequence& a : av_inits) {
    for (const ControlSequence& h : human_inits) {
      set_warm_start(a, h);
      PlanResult r = best_response(x0, cfg_.influence_term);
      if (!best || r.objective > best->objective) best = std::move(r);
    }
  }
  shift_warm_start(*best);
  return *best;
}

std::vector<ControlSequence> diverse_initializations(int M) {
  ControlSequence left = ControlSequence::Zero(2, M);
  left.row(0).setConstant(VehicleLimits::kSteerMax);
  ControlSequence right = ControlSequence::Zero(2, M);
  right.row(0).setConstant(-VehicleLimits::kSteerMax);
  return {left, right, ControlSequence::Zero(2, M)};
}

PlanResult plan_long_horizon(TacticalPlanner& planner, const JointState& x0) {
  const auto inits = diverse_initializations(planner.config().M);
  return planner.plan_multistart(x0, inits, inits);
}

}  // namespace hgp
