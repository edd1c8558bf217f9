#include "hgp/grid.hpp"

#include "hgp/dynamics.hpp"
#include "hgp/errors.hpp"

namespace hgp {

std::size_t GridSpec::cell_count() const {
  std::size_t n = 1;
  for (const Axis& a : axes) n *= static_cast<std::size_t>(a.count);
  return n;
}

std::vector<std::size_t> GridSpec::strides() const {
  std::vector<std::size_t> s(axes.size(), 1);
  for (int d = dims() - 2; d >= 0; --d) s[d] = s[d + 1] * axes[d + 1].count;
  return s;
}

void GridSpec::validate() const {
  if (axes.empty()) throw ConfigError("grid: at least one axis required");
  for (const Axis& a : axes) {
    if (!std::isfinite(a.min) || !std::isfinite(a.max) || !(a.min < a.max)) {
      throw ConfigError("grid axis '" + a.name + "': min must be < max");
    }
    if (a.count < 2) throw ConfigError("grid axis '" + a.name + "': count must be >= 2");
  }
  if (K < 0) throw ConfigError("grid: K must be >= 0");
  if (!(dk > 0.0)) throw ConfigError("grid: dk must be > 0");
}

int GridSpec::axis_index(const std::string& name) const {
  for (int d = 0; d < dims(); ++d) {
    if (axes[d].name == name) return d;
  }
  return -1;
}

Eigen::VectorXd GridSpec::node(std::size_t flat) const {
  Eigen::VectorXd p(dims());
  for (int d = dims() - 1; d >= 0; --d) {
    const auto n = static_cast<std::size_t>(axes[d].count);
    p[d] = axes[d].node(static_cast<int>(flat % n));
    flat /= n;
  }
  return p;
}

GridSpec GridSpec::default_3d() {
  GridSpec g;
  g.axes = {{"x_rel", -50.0, 50.0, 101},
            {"y_A", RoadGeometry::kMinY, RoadGeometry::kMaxY, 17},
            {"v_rel", -10.5, 10.5, 43}};
  return g;
}

GridSpec GridSpec::default_4d() {
  GridSpec g;
  g.axes = {{"x_rel", -37.0, 37.0, 75},
            {"y_A", RoadGeometry::kMinY, RoadGeometry::kMaxY, 12},
            {"y_H", RoadGeometry::kMinY, RoadGeometry::kMaxY, 12},
            {"v_rel", -10.0, 10.0, 21}};
  return g;
}

double interpolate(const GridSpec& grid, std::span<const double> values,
                   std::span<const double> point, Eigen::VectorXd* gradient) {
  const int dims = grid.dims();
  if (static_cast<int>(point.size()) != dims) {
    throw DimensionError("interpolate: point has " + std::to_string(point.size()) +
                         " coordinates, grid has " + std::to_string(dims));
  }
  if (values.size() != grid.cell_count()) {
    throw DimensionError("interpolate: value array does not match grid");
  }
  const std::vector<std::size_t> strides = grid.strides();
  std::vector<AxisPosition> pos(dims);
  std::size_t base = 0;
  for (int d = 0; d < dims; ++d) {
    pos[d] = locate(grid.axes[d], point[d]);
    base += static_cast<std::size_t>(pos[d].lower) * strides[d];
  }
  if (gradient) gradient->setZero(dims);
  double acc = 0.0;
  const int corners = 1 << dims;
  for (int c = 0; c < corners; ++c) {
    std::size_t idx = base;
    double w = 1.0;
    for (int d = 0; d < dims; ++d) {
      const bool upper = c & (1 << (dims - 1 - d));
      if (upper) idx += strides[d];
      w *= upper ? pos[d].frac : 1.0 - pos[d].frac;
    }
    const double v = values[idx];
    acc += w * v;
    if (!gradient) continue;
    for (int d = 0; d < dims; ++d) {
      if (pos[d].clamped) continue;
      double dw = 1.0 / grid.axes[d].spacing();
      for (int e = 0; e < dims; ++e) {
        const bool upper = c & (1 << (dims - 1 - e));
        if (e == d) {
          dw *= upper ? 1.0 : -1.0;
        } else {
          dw *= upper ? pos[e].frac : 1.0 - pos[e].frac;
        }
      }
      (*gradient)[d] += dw * v;
    }
  }
  return acc;
}

}  // namespace hgp
