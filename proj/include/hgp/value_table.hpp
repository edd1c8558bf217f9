#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hgp/dynamics.hpp"
#include "hgp/grid.hpp"

namespace hgp {

enum class ModelTag : std::uint8_t { kGeneric = 0, k3d = 3, k4d = 4 };
enum class Player { kA, kH };

std::string to_string(ModelTag tag);
ModelTag model_tag_from_string(const std::string& name);

// Ordered list of fixed-width action tuples, e.g. (w_A, a_A) pairs.
struct ActionTuples {
  int width = 1;
  std::vector<double> values;

  int size() const { return width == 0 ? 0 : static_cast<int>(values.size()) / width; }
  std::span<const double> operator[](int i) const {
    return {values.data() + static_cast<std::size_t>(i) * width,
            static_cast<std::size_t>(width)};
  }
  bool operator==(const ActionTuples&) const = default;
};

using PolicyMatrix = Eigen::Matrix<std::uint16_t, Eigen::Dynamic, Eigen::Dynamic>;

// Gridded game values for stages 0..K, one column per stage. Stage K+1 is the
// terminal stage and is identically zero; it is not stored.
struct ValueTable {
  GridSpec grid;
  ModelTag model = ModelTag::kGeneric;
  double beta = 1.0;
  double alpha = 0.0;
  ActionTuples leader_actions;
  ActionTuples follower_actions;
  std::array<std::uint8_t, 32> reward_hash{};
  Eigen::MatrixXd value_A;  // cells x (K+1)
  Eigen::MatrixXd value_H;
  PolicyMatrix policy;      // leader action index, cells x (K+1)

  static constexpr std::uint32_t kFormatVersion = 1;

  int stages() const { return grid.K + 1; }

  // Multilinear lookup; k may be K+1 (returns 0). Out-of-range coordinates are
  // clamped. Throws DimensionError when the point does not match the grid.
  double lookup(std::span<const double> s, int k, Player p) const;
  double lookup(const Strat3State& s, int k, Player p) const;
  double lookup(const Strat4State& s, int k, Player p) const;

  // Lookup plus the derivative of the interpolant at s.
  double lookup_with_gradient(std::span<const double> s, int k, Player p,
                              Eigen::VectorXd& gradient) const;

  // Central differences of lookup() with one grid spacing per axis, one-sided
  // where a full step would leave the grid.
  Eigen::VectorXd value_gradient(std::span<const double> s, int k, Player p) const;

  void save(const std::filesystem::path& path) const;
  static ValueTable load(const std::filesystem::path& path);

  std::vector<std::uint8_t> serialize() const;
  static ValueTable deserialize(std::span<const std::uint8_t> bytes);

  bool operator==(const ValueTable& other) const;

 private:
  void check_query(std::size_t dims, int k) const;
};

// Values of `table` at stage k over the nodes of two free axes, all other axes
// held at `fixed`. Rows follow free.first, columns free.second. Missing fixed
// axes default to 0.
Eigen::MatrixXd export_heatmap_slice(const ValueTable& table, int k,
                                     const std::map<std::string, double>& fixed,
                                     const std::pair<std::string, std::string>& free,
                                     Player p = Player::kA);

// CSV with a header row of column-axis coordinates; each row starts with its
// row-axis coordinate.
std::string heatmap_csv(const ValueTable& table, const Eigen::MatrixXd& slice,
                        const std::pair<std::string, std::string>& free);

// Binary PPM (P6); min maps to red, max to blue, linear in between.
std::vector<std::uint8_t> heatmap_ppm(const Eigen::MatrixXd& slice);

}  // namespace hgp
