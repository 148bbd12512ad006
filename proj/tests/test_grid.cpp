#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "mpsense/grid.hpp"

using namespace mpsense;

namespace {

MatrixXc random_gram(Index mt, std::mt19937_64& rng) {
  MatrixXc u(mt, mt + 3);
  for (Index i = 0; i < u.size(); ++i) u(i) = complex_normal<double>(rng);
  return u * u.adjoint();
}

OffsetVectors<double> random_offsets(const GridModel<double>& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-g.half_spacing(), g.half_spacing());
  OffsetVectors<double> off = OffsetVectors<double>::zeros(g.q_total);
  for (Index q = 0; q < g.q_total; ++q) {
    off.dtheta_t[q] = u(rng);
    off.dtheta_r[q] = u(rng);
  }
  return off;
}

}  // namespace

TEST_CASE("grid indexing") {
  const auto g2 = build_grid<double>(2);
  CHECK(g2.q_total == 4);
  CHECK(g2.index(0, 0) == 0);
  CHECK(g2.index(0, 1) == 1);
  CHECK(g2.index(1, 0) == 2);
  CHECK(g2.index(1, 1) == 3);
  CHECK(build_grid<double>(16).q_total == 256);
  CHECK_THROWS_AS(build_grid<double>(1), std::invalid_argument);

  const auto g = build_grid<double>(7);
  std::set<std::pair<double, double>> seen;
  for (Index q = 0; q < g.q_total; ++q) {
    CHECK(g.index(g.tx_of(q), g.rx_of(q)) == q);
    CHECK(g.is_diagonal(q) == (g.theta_t[q] == g.theta_r[q]));
    seen.insert({g.theta_t[q], g.theta_r[q]});
  }
  CHECK(static_cast<Index>(seen.size()) == g.q_total);
  for (Index i = 0; i + 1 < g.q_base; ++i) CHECK(g.base_grid[i + 1] - g.base_grid[i] == doctest::Approx(g.spacing));
  CHECK(g.base_grid[0] > -kPi<double> / 2);
  CHECK(g.base_grid[g.q_base - 1] < kPi<double> / 2);
}

TEST_CASE("scalar arrays give an all-ones dictionary") {
  const auto g = build_grid<double>(4);
  const auto d = measurement_matrix(g, OffsetVectors<double>::zeros(g.q_total), MatrixXc(MatrixXc::Identity(1, 1)), 1);
  CHECK(d.F.rows() == 1);
  CHECK((d.F.array() - cdouble(1, 0)).abs().maxCoeff() < 1e-15);
}

TEST_CASE("scaled identity gram scales F and fixes the column norms") {
  const auto g = build_grid<double>(8);
  const auto zero = OffsetVectors<double>::zeros(g.q_total);
  const auto d1 = measurement_matrix(g, zero, MatrixXc(MatrixXc::Identity(6, 6)), 5);
  const auto d3 = measurement_matrix(g, zero, MatrixXc(3.0 * MatrixXc::Identity(6, 6)), 5);
  CHECK((d3.F - 3.0 * d1.F).norm() < 1e-12 * d1.F.norm());
  const VectorXd norms = d3.F.colwise().norm().transpose();
  CHECK((norms.array() - 3.0 * std::sqrt(30.0)).abs().maxCoeff() < 1e-12);
}

TEST_CASE("dictionary column equals channel-then-filter") {
  std::mt19937_64 rng(31);
  const auto g = build_grid<double>(5);
  const Index mt = 4, mr = 3;
  const MatrixXc u = [&] {
    MatrixXc w(mt, 6);
    for (Index i = 0; i < w.size(); ++i) w(i) = complex_normal<double>(rng);
    return w;
  }();
  const MatrixXc gram = u * u.adjoint();
  const auto off = random_offsets(g, rng);
  const auto d = measurement_matrix(g, off, gram, mr);
  for (Index q = 0; q < g.q_total; ++q) {
    const VectorXc at = steering_vector(g.theta_t[q] + off.dtheta_t[q], mt);
    const VectorXc ar = steering_vector(g.theta_r[q] + off.dtheta_r[q], mr);
    const MatrixXc h = ar * at.transpose();
    const MatrixXc y = h * u * u.adjoint();
    const VectorXc v = Eigen::Map<const VectorXc>(y.data(), y.size());
    CHECK((d.F.col(q) - v).norm() < 1e-12 * v.norm());
    CHECK((d.A_t.col(q) - at).norm() < 1e-15);
    CHECK((d.A_r.col(q) - ar).norm() < 1e-15);
  }
}

TEST_CASE("refresh_columns touches only the listed columns") {
  std::mt19937_64 rng(2);
  const auto g = build_grid<double>(6);
  const MatrixXc gram = random_gram(4, rng);
  auto off = OffsetVectors<double>::zeros(g.q_total);
  auto d = measurement_matrix(g, off, gram, 4);
  const MatrixXc before = d.F;
  off.dtheta_t[7] = 0.05;
  off.dtheta_r[7] = -0.02;
  off.dtheta_t[9] = 0.01;
  const std::vector<Index> cols{7};
  refresh_columns(d, g, off, gram, 4, std::span<const Index>(cols));
  const auto full = measurement_matrix(g, off, gram, 4);
  CHECK((d.F.col(7) - full.F.col(7)).norm() < 1e-13);
  CHECK(d.F.col(9) == before.col(9));
}

TEST_CASE("column derivative against central differences") {
  std::mt19937_64 rng(77);
  const auto g = build_grid<double>(8);
  const Index mt = 8, mr = 8;
  const MatrixXc gram = random_gram(mt, rng);
  std::uniform_int_distribution<Index> cell(0, g.q_total - 1);
  const double h = 1e-6;
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    auto off = random_offsets(g, rng);
    const Index q = cell(rng);
    for (Axis axis : {Axis::Transmit, Axis::Receive}) {
      const VectorXc analytic = column_derivative(g, off, gram, mr, q, axis);
      auto plus = off, minus = off;
      (axis == Axis::Transmit ? plus.dtheta_t : plus.dtheta_r)[q] += h;
      (axis == Axis::Transmit ? minus.dtheta_t : minus.dtheta_r)[q] -= h;
      const std::vector<Index> one{q};
      Dictionaries<double> dp{MatrixXc(mt, g.q_total), MatrixXc(mr, g.q_total), MatrixXc(mt * mr, g.q_total)};
      Dictionaries<double> dm = dp;
      refresh_columns(dp, g, plus, gram, mr, std::span<const Index>(one));
      refresh_columns(dm, g, minus, gram, mr, std::span<const Index>(one));
      const VectorXc fd = (dp.F.col(q) - dm.F.col(q)) / (2 * h);
      worst = std::max(worst, (fd - analytic).norm() / analytic.norm());
    }
  }
  MESSAGE("worst relative error " << worst);
  CHECK(worst < 1e-6);
}

TEST_CASE("derivative corner cases") {
  const auto g = build_grid<double>(4);
  const auto zero = OffsetVectors<double>::zeros(g.q_total);
  const VectorXc d1 = column_derivative(g, zero, MatrixXc(MatrixXc::Identity(1, 1)), 1, 3, Axis::Transmit);
  CHECK(d1.norm() == 0.0);
  const VectorXc da = steering_derivative(0.3, 5);
  CHECK(std::abs(da[0]) == 0.0);
  CHECK(steering_derivative(kPi<double> / 2, 5).norm() < 1e-13);
  CHECK_THROWS_AS(column_derivative(g, zero, MatrixXc(MatrixXc::Identity(2, 2)), 2, g.q_total, Axis::Receive), std::out_of_range);
  CHECK_THROWS_AS(measurement_matrix(g, OffsetVectors<double>::zeros(3), MatrixXc(MatrixXc::Identity(2, 2)), 2),
                  std::invalid_argument);
}

TEST_CASE("nearest grid assignment") {
  const auto g = build_grid<double>(16);

  const std::vector<double> on{g.base_grid[2], g.base_grid[9]};
  const GridAssignment a = nearest_grid_assignment(on, g);
  CHECK(a.offsets.dtheta_t.cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.offsets.dtheta_r.cwiseAbs().maxCoeff() == 0.0);

  const std::vector<double> single{0.123};
  const GridAssignment s = nearest_grid_assignment(single, g);
  REQUIRE(s.cells.size() == 1);
  CHECK(g.is_diagonal(s.cells[0]));

  // Cross pattern for K = 2, against a full scan of every cell.
  const std::vector<double> two{-0.71, 0.42};
  const GridAssignment c = nearest_grid_assignment(two, g);
  REQUIRE(c.cells.size() == 4);
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 2; ++j) {
      Index best = -1;
      double best_cost = 1e9;
      for (Index q = 0; q < g.q_total; ++q) {
        const double cost = std::abs(two[i] - g.theta_t[q]) + std::abs(two[j] - g.theta_r[q]);
        if (cost < best_cost) {
          best_cost = cost;
          best = q;
        }
      }
      const Index q = c.cells[i * 2 + j];
      CHECK(q == best);
      CHECK(c.offsets.dtheta_t[q] == doctest::Approx(two[i] - g.theta_t[q]));
      CHECK(c.offsets.dtheta_r[q] == doctest::Approx(two[j] - g.theta_r[q]));
    }
  CHECK(c.direct_cells[0] == c.cells[0]);
  CHECK(c.direct_cells[1] == c.cells[3]);
  CHECK(g.tx_of(c.cells[1]) == g.tx_of(c.cells[0]));
  CHECK(g.rx_of(c.cells[1]) == g.rx_of(c.cells[3]));

  const std::vector<double> clash{0.40, 0.41};
  CHECK_THROWS_AS(nearest_grid_assignment(clash, g), GridCollision);
}
