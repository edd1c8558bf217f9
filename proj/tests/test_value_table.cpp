#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "doctest.h"
#include "hgp/errors.hpp"
#include "hgp/strategic_game.hpp"
#include "hgp/value_table.hpp"
#include "oracles.hpp"

using namespace hgp;

namespace {

GridSpec small_3d() {
  GridSpec g;
  g.axes = {Axis{"x_rel", -20, 20, 9}, Axis{"y_A", 0, 7.4, 5}, Axis{"v_rel", -6, 6, 7}};
  g.K = 2;
  return g;
}

using oracle::affine_table;
using oracle::random_table;

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("hgp_test_" + name);
}

}  // namespace

TEST_SUITE("value_table") {

TEST_CASE("node queries return stored values exactly") {
  const GridSpec grid = small_3d();
  for (unsigned seed : {1u, 2u, 3u}) {
    const ValueTable t = random_table(grid, ModelTag::k3d, seed);
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
      const Eigen::VectorXd s = grid.node(c);
      for (int k = 0; k <= grid.K; ++k) {
        const auto row = static_cast<Eigen::Index>(c);
        CHECK(std::abs(t.lookup(std::span<const double>(s.data(), 3), k, Player::kA) -
                       t.value_A(row, k)) < 1e-12);
        CHECK(std::abs(t.lookup(std::span<const double>(s.data(), 3), k, Player::kH) -
                       t.value_H(row, k)) < 1e-12);
      }
    }
  }
}

TEST_CASE("midpoints are the mean of neighbouring nodes") {
  const GridSpec grid = small_3d();
  const ValueTable t = random_table(grid, ModelTag::k3d, 4);
  const auto strides = grid.strides();
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const int axis = static_cast<int>(rng() % 3);
    Eigen::Vector3i idx;
    for (int d = 0; d < 3; ++d) {
      const int limit = grid.axes[d].count - (d == axis ? 1 : 0);
      idx[d] = static_cast<int>(rng() % static_cast<unsigned>(limit));
    }
    std::size_t lo = 0;
    Eigen::Vector3d p;
    for (int d = 0; d < 3; ++d) {
      lo += static_cast<std::size_t>(idx[d]) * strides[d];
      p[d] = grid.axes[d].node(idx[d]);
    }
    const std::size_t hi = lo + strides[axis];
    p[axis] += 0.5 * grid.axes[axis].spacing();
    const int k = static_cast<int>(rng() % 3);
    const double mean = 0.5 * (t.value_A(static_cast<Eigen::Index>(lo), k) +
                               t.value_A(static_cast<Eigen::Index>(hi), k));
    CHECK(std::abs(t.lookup(std::span<const double>(p.data(), 3), k, Player::kA) - mean) <
          1e-12);
  }
}

TEST_CASE("queries outside the grid clamp to the boundary") {
  const GridSpec grid = small_3d();
  const ValueTable t = random_table(grid, ModelTag::k3d, 6);
  const Strat3State inside{20, 3.7, 1.5};
  const Strat3State beyond{75, 3.7, 1.5};
  CHECK(t.lookup(beyond, 0, Player::kA) == t.lookup(inside, 0, Player::kA));
  const Strat3State below{-20, -3, -60};
  const Strat3State corner{-20, 0, -6};
  CHECK(t.lookup(below, 1, Player::kH) == t.lookup(corner, 1, Player::kH));
}

TEST_CASE("stage past the horizon is zero") {
  const ValueTable t = random_table(small_3d(), ModelTag::k3d, 7);
  CHECK(t.lookup(Strat3State{1, 2, 3}, t.grid.K + 1, Player::kA) == 0.0);
  CHECK_THROWS_AS(t.lookup(Strat3State{1, 2, 3}, t.grid.K + 2, Player::kA), DimensionError);
  CHECK_THROWS_AS(t.lookup(Strat3State{1, 2, 3}, -1, Player::kA), DimensionError);
}

TEST_CASE("wrong state dimension is rejected") {
  const ValueTable t = random_table(small_3d(), ModelTag::k3d, 8);
  CHECK_THROWS_AS(t.lookup(Strat4State{0, 1.85, 5.55, 0}, 0, Player::kA), DimensionError);
  const std::vector<double> two = {0.0, 1.0};
  CHECK_THROWS_AS(t.lookup(two, 0, Player::kA), DimensionError);
}

TEST_CASE("gradients are exact on affine tables") {
  const GridSpec grid = small_3d();
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Eigen::Vector3d slopes[] = {{2.0, 0.0, 0.0}, {-1.5, 3.25, 0.75}};
  for (const Eigen::Vector3d& slope : slopes) {
    const ValueTable t = affine_table(grid, slope, 4.0);
    for (int i = 0; i < 200; ++i) {
      Eigen::Vector3d s;
      for (int d = 0; d < 3; ++d) {
        const Axis& a = grid.axes[d];
        s[d] = a.min + (a.max - a.min) * u(rng);
      }
      const std::span<const double> view(s.data(), 3);
      const Eigen::VectorXd g = t.value_gradient(view, 0, Player::kA);
      CHECK((g - slope).cwiseAbs().maxCoeff() < 1e-12);
      Eigen::VectorXd exact;
      t.lookup_with_gradient(view, 0, Player::kH, exact);
      CHECK((exact + slope).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("constant table has zero gradient") {
  const GridSpec grid = small_3d();
  const ValueTable t = affine_table(grid, Eigen::Vector3d::Zero(), 7.0);
  const Eigen::Vector3d s{3.3, 2.2, -1.1};
  CHECK(t.value_gradient(std::span<const double>(s.data(), 3), 1, Player::kA).isZero(0.0));
  CHECK(t.lookup(Strat3State{3.3, 2.2, -1.1}, 1, Player::kA) == doctest::Approx(7.0));
}

TEST_CASE("save and load round trip") {
  const ValueTable t = random_table(small_3d(), ModelTag::k3d, 10);
  const auto path = temp_path("roundtrip.sgvt");
  t.save(path);
  const ValueTable back = ValueTable::load(path);
  CHECK(back == t);
  CHECK(back.serialize() == t.serialize());
  std::filesystem::remove(path);

  GridSpec g4 = small_3d();
  g4.axes.insert(g4.axes.begin() + 2, Axis{"y_H", 0, 7.4, 3});
  const ValueTable t4 = random_table(g4, ModelTag::k4d, 11);
  CHECK(ValueTable::deserialize(t4.serialize()) == t4);
}

TEST_CASE("header layout") {
  const ValueTable t = random_table(small_3d(), ModelTag::k3d, 12);
  const std::vector<std::uint8_t> bytes = t.serialize();
  REQUIRE(bytes.size() > 16);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SGVT");
  CHECK(bytes[4] == ValueTable::kFormatVersion);
  CHECK(bytes[8] == 3);
}

TEST_CASE("damaged files are rejected") {
  const ValueTable t = random_table(small_3d(), ModelTag::k3d, 13);
  const std::vector<std::uint8_t> good = t.serialize();

  std::vector<std::uint8_t> bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(ValueTable::deserialize(bad_magic), FormatError);

  std::vector<std::uint8_t> bad_version = good;
  bad_version[4] = 9;
  CHECK_THROWS_WITH_AS(ValueTable::deserialize(bad_version), doctest::Contains("1"),
                       FormatError);

  std::vector<std::uint8_t> flipped = good;
  flipped[good.size() / 2] ^= 0x5a;
  CHECK_THROWS_WITH_AS(ValueTable::deserialize(flipped), doctest::Contains("checksum"),
                       FormatError);

  const std::vector<std::uint8_t> truncated(good.begin(), good.begin() + 40);
  CHECK_THROWS_AS(ValueTable::deserialize(truncated), FormatError);

  CHECK_THROWS_AS(ValueTable::load(temp_path("does_not_exist.sgvt")), FormatError);
}

TEST_CASE("heatmap slices") {
  const GridSpec grid = small_3d();
  const ValueTable flat = affine_table(grid, Eigen::Vector3d::Zero(), -3.0);
  const Eigen::MatrixXd m = export_heatmap_slice(flat, 0, {{"v_rel", 0.0}}, {"x_rel", "y_A"});
  CHECK(m.rows() == 9);
  CHECK(m.cols() == 5);
  CHECK((m.array() == -3.0).all());

  const std::vector<std::uint8_t> ppm = heatmap_ppm(m);
  const std::string head = "P6\n5 9\n255\n";
  REQUIRE(ppm.size() == head.size() + 3 * 45);
  CHECK(std::string(ppm.begin(), ppm.begin() + static_cast<long>(head.size())) == head);
  for (std::size_t i = head.size(); i < ppm.size(); i += 3) {
    CHECK(ppm[i] == ppm[head.size()]);
    CHECK(ppm[i + 1] == ppm[head.size() + 1]);
    CHECK(ppm[i + 2] == ppm[head.size() + 2]);
  }

  const ValueTable sloped = affine_table(grid, Eigen::Vector3d{1.0, 0.0, 0.0}, 0.0);
  const Eigen::MatrixXd s = export_heatmap_slice(sloped, 0, {{"v_rel", 0.0}}, {"x_rel", "y_A"});
  for (int r = 0; r < s.rows(); ++r) CHECK(s(r, 0) == doctest::Approx(grid.axes[0].node(r)));

  CHECK_THROWS_AS(export_heatmap_slice(flat, 0, {}, {"x_rel", "speed"}), ConfigError);
  CHECK_THROWS_AS(export_heatmap_slice(flat, 0, {{"bogus", 1.0}}, {"x_rel", "y_A"}),
                  ConfigError);
  CHECK_THROWS_AS(export_heatmap_slice(flat, 0, {}, {"x_rel", "x_rel"}), ConfigError);

  const std::string csv = heatmap_csv(flat, m, {"x_rel", "y_A"});
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
}

TEST_CASE("default 3-D slice shape") {
  GridSpec grid = GridSpec::default_3d();
  grid.K = 0;
  ValueTable t;
  t.grid = grid;
  t.model = ModelTag::k3d;
  t.value_A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.cell_count()), 1);
  t.value_H = t.value_A;
  t.policy = PolicyMatrix::Zero(t.value_A.rows(), 1);
  const Eigen::MatrixXd m = export_heatmap_slice(t, 0, {{"v_rel", 0.0}}, {"x_rel", "y_A"});
  CHECK(m.rows() == 101);
  CHECK(m.cols() == 17);
}

}  // TEST_SUITE
