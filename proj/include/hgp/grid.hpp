#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace hgp {

struct Axis {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  int count = 2;

  double spacing() const { return (max - min) / (count - 1); }
  double node(int i) const { return i == count - 1 ? max : min + i * spacing(); }

  bool operator==(const Axis&) const = default;
};

// Uniform tensor grid over the simplified state, plus the stage structure of
// the game played on it. Flattened indices are row-major in axis order (the
// last axis varies fastest).
struct GridSpec {
  std::vector<Axis> axes;
  int K = 10;        // last decision stage; stages run 0..K
  double dk = 0.5;   // seconds per stage

  int dims() const { return static_cast<int>(axes.size()); }
  std::size_t cell_count() const;
  std::vector<std::size_t> strides() const;

  // Throws ConfigError on empty grids, min >= max, count < 2, K < 0, dk <= 0.
  void validate() const;

  // Index of the axis called `name`, or -1.
  int axis_index(const std::string& name) const;

  Eigen::VectorXd node(std::size_t flat) const;

  // 101 x 17 x 43 over (x_rel, y_A, v_rel).
  static GridSpec default_3d();
  // 75 x 12 x 12 x 21 over (x_rel, y_A, y_H, v_rel).
  static GridSpec default_4d();

  bool operator==(const GridSpec&) const = default;
};

// Position of a coordinate along one axis: lower node index and the fractional
// offset toward the next node. Coordinates are clamped to the axis range.
struct AxisPosition {
  int lower = 0;
  double frac = 0.0;
  bool clamped = false;
};

inline AxisPosition locate(const Axis& axis, double c) {
  AxisPosition p;
  if (c <= axis.min) {
    p.clamped = c < axis.min;
    return p;
  }
  if (c >= axis.max) {
    p.clamped = c > axis.max;
    p.lower = axis.count - 2;
    p.frac = 1.0;
    return p;
  }
  double pos = (c - axis.min) / axis.spacing();
  // Snap round-off so node queries return stored values exactly.
  const double nearest = std::round(pos);
  if (std::abs(pos - nearest) < 1e-10) pos = nearest;
  p.lower = std::min(static_cast<int>(pos), axis.count - 2);
  p.frac = pos - p.lower;
  return p;
}

// Corner indices and weights of the multilinear interpolation stencil.
template <int Dim>
struct Stencil {
  static constexpr int kCorners = 1 << Dim;
  std::array<std::size_t, kCorners> index{};
  std::array<double, kCorners> weight{};

  template <typename Values>
  double apply(const Values& v) const {
    double acc = 0.0;
    for (int c = 0; c < kCorners; ++c) acc += weight[c] * v[index[c]];
    return acc;
  }
};

template <int Dim>
Stencil<Dim> make_stencil(const GridSpec& grid, const std::size_t* strides,
                          const double* point) {
  std::array<AxisPosition, Dim> pos;
  std::size_t base = 0;
  for (int d = 0; d < Dim; ++d) {
    pos[d] = locate(grid.axes[d], point[d]);
    base += static_cast<std::size_t>(pos[d].lower) * strides[d];
  }
  Stencil<Dim> st;
  for (int c = 0; c < Stencil<Dim>::kCorners; ++c) {
    std::size_t idx = base;
    double w = 1.0;
    for (int d = 0; d < Dim; ++d) {
      if (c & (1 << (Dim - 1 - d))) {
        idx += strides[d];
        w *= pos[d].frac;
      } else {
        w *= 1.0 - pos[d].frac;
      }
    }
    st.index[c] = idx;
    st.weight[c] = w;
  }
  return st;
}

// Multilinear interpolation of node values at `point` (any dimension), with
// clamping to the grid box. When `gradient` is non-null it receives the
// derivative of the interpolant; clamped axes contribute zero.
double interpolate(const GridSpec& grid, std::span<const double> values,
                   std::span<const double> point, Eigen::VectorXd* gradient = nullptr);

}  // namespace hgp
