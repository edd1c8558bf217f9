#pragma once

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

namespace hgp {

// Forward-mode scalar used to differentiate planner rollouts.
using AutoDiffXd = Eigen::AutoDiffScalar<Eigen::VectorXd>;

inline double value_of(double x) { return x; }

template <typename Derivative>
double value_of(const Eigen::AutoDiffScalar<Derivative>& x) {
  return x.value();
}

}  // namespace hgp
