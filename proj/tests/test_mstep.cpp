#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mpsense/mstep.hpp"

using namespace mpsense;

namespace {

struct Setup {
  GridModel<double> grid;
  MatrixXc gram;
  Index m_r;
  VectorXc y;
};

Setup make_setup(Index q, Index mt, Index mr, std::mt19937_64& rng) {
  MatrixXc u(mt, mt + 2);
  for (Index i = 0; i < u.size(); ++i) u(i) = complex_normal<double>(rng);
  VectorXc y(mt * mr);
  for (Index i = 0; i < y.size(); ++i) y[i] = complex_normal<double>(rng);
  return {build_grid<double>(q), u * u.adjoint(), mr, y};
}

// Residual through the full dictionary builder, kept apart from OffsetProblem.
double direct_objective(const Setup& s, const std::vector<Index>& cells, const VectorXd& dt, const VectorXd& dr,
                        const VectorXc& mu, double gamma) {
  auto off = OffsetVectors<double>::zeros(s.grid.q_total);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    off.dtheta_t[cells[k]] = dt[static_cast<Index>(k)];
    off.dtheta_r[cells[k]] = dr[static_cast<Index>(k)];
  }
  const auto d = measurement_matrix(s.grid, off, s.gram, s.m_r);
  VectorXc r = s.y;
  for (std::size_t k = 0; k < cells.size(); ++k) r -= d.F.col(cells[k]) * mu[static_cast<Index>(k)];
  return -gamma * r.squaredNorm();
}

VectorXd uniform_vec(Index n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  VectorXd v(n);
  for (Index k = 0; k < n; ++k) v[k] = u(rng);
  return v;
}

VectorXc complex_vec(Index n, std::mt19937_64& rng) {
  VectorXc v(n);
  for (Index k = 0; k < n; ++k) v[k] = complex_normal<double>(rng);
  return v;
}

}  // namespace

TEST_CASE("grid selection") {
  const VectorXd lambda = (VectorXd(5) << 0.9, 0.5, 0.81, 0.8, 0.95).finished();
  const ActiveSet a = select_grids(lambda, 0.8);
  CHECK(a.indices == std::vector<Index>{0, 2, 4});
  CHECK(a.s_hat == (VectorXi(5) << 1, 0, 1, 0, 1).finished());
  CHECK(select_grids(VectorXd::Constant(4, 0.2), 0.8).empty());
  CHECK(select_grids(lambda, 0.0).size() == 5);
  const ActiveSet f = full_set(3);
  CHECK(f.indices == std::vector<Index>{0, 1, 2});
  CHECK(f.s_hat.sum() == 3);

  MStepConfig c;
  CHECK_NOTHROW(c.validate());
  c.tau_s = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("objective matches a residual built from the full dictionary") {
  std::mt19937_64 rng(1);
  const Setup s = make_setup(6, 5, 4, rng);
  const std::vector<Index> cells{0, 8, 21, 35};
  for (int t = 0; t < 10; ++t) {
    const double h = s.grid.half_spacing();
    const VectorXd dt = uniform_vec(4, -h, h, rng), dr = uniform_vec(4, -h, h, rng);
    const VectorXc mu = complex_vec(4, rng);
    const double v = objective(s.y, s.grid, s.gram, s.m_r, cells, dt, dr, mu, 1.7);
    CHECK(v == doctest::Approx(direct_objective(s, cells, dt, dr, mu, 1.7)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(OffsetProblem(s.y, s.grid, s.gram, s.m_r, cells, VectorXc::Zero(3), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(OffsetProblem(s.y, s.grid, s.gram, s.m_r, {36}, VectorXc::Zero(1), 1.0), std::out_of_range);
  CHECK_THROWS_AS(OffsetProblem(s.y, s.grid, s.gram, s.m_r, cells, 1.0, VectorXd::Zero(4)), std::invalid_argument);
}

TEST_CASE("offset gradient against central differences") {
  std::mt19937_64 rng(2);
  const Setup s = make_setup(8, 8, 8, rng);
  std::uniform_int_distribution<Index> cell(0, s.grid.q_total - 1);
  const double step = 1e-6;
  double worst_fixed = 0.0, worst_profiled = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::vector<Index> cells{cell(rng), cell(rng), cell(rng)};
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    const Index n = static_cast<Index>(cells.size());
    const double h = s.grid.half_spacing();
    const VectorXd dt = uniform_vec(n, -h, h, rng), dr = uniform_vec(n, -h, h, rng);
    const OffsetProblem fixed(s.y, s.grid, s.gram, s.m_r, cells, complex_vec(n, rng), 0.8);
    const OffsetProblem prof(s.y, s.grid, s.gram, s.m_r, cells, 0.8, uniform_vec(n, 0.1, 2.0, rng));
    for (const OffsetProblem* p : {&fixed, &prof}) {
      const auto [gt, gr] = p->gradient(dt, dr);
      VectorXd ft(n), fr(n);
      for (Index k = 0; k < n; ++k) {
        VectorXd a = dt, b = dt;
        a[k] += step;
        b[k] -= step;
        ft[k] = (p->value(a, dr) - p->value(b, dr)) / (2 * step);
        a = dr;
        b = dr;
        a[k] += step;
        b[k] -= step;
        fr[k] = (p->value(dt, a) - p->value(dt, b)) / (2 * step);
      }
      const double scale = std::max({gt.norm(), gr.norm(), 1e-12});
      const double err = std::max((ft - gt).norm(), (fr - gr).norm()) / scale;
      (p == &fixed ? worst_fixed : worst_profiled) = std::max(p == &fixed ? worst_fixed : worst_profiled, err);
    }
  }
  MESSAGE("worst relative error, fixed " << worst_fixed << " profiled " << worst_profiled);
  CHECK(worst_fixed < 1e-6);
  CHECK(worst_profiled < 1e-6);
}

TEST_CASE("zero amplitudes give a zero gradient") {
  std::mt19937_64 rng(3);
  const Setup s = make_setup(5, 4, 4, rng);
  const std::vector<Index> cells{3, 7};
  const auto [gt, gr] = grad_offsets(s.y, s.grid, s.gram, s.m_r, cells, VectorXd::Zero(2), VectorXd::Zero(2),
                                     VectorXc::Zero(2), 1.0);
  CHECK(gt.norm() == 0.0);
  CHECK(gr.norm() == 0.0);
  const OffsetProblem empty(s.y, s.grid, s.gram, s.m_r, {}, VectorXc(), 1.0);
  CHECK(empty.value(VectorXd(), VectorXd()) == doctest::Approx(-s.y.squaredNorm()));
}

TEST_CASE("profiled amplitudes solve the regularized normal equations") {
  std::mt19937_64 rng(4);
  const Setup s = make_setup(6, 6, 6, rng);
  const std::vector<Index> cells{2, 14, 30};
  const VectorXd rho = uniform_vec(3, 0.2, 3.0, rng);
  const OffsetProblem p(s.y, s.grid, s.gram, s.m_r, cells, 1.3, rho);
  CHECK(p.profiled());
  const VectorXd dt = uniform_vec(3, -0.05, 0.05, rng), dr = uniform_vec(3, -0.05, 0.05, rng);
  const VectorXc mu = p.amplitudes(dt, dr);
  // Any perturbation of mu lowers the penalized objective.
  const double best = direct_objective(s, cells, dt, dr, mu, 1.3) - rho.dot(mu.cwiseAbs2());
  CHECK(p.value(dt, dr) == doctest::Approx(best).epsilon(1e-12));
  for (int t = 0; t < 20; ++t) {
    const VectorXc other = mu + 0.01 * complex_vec(3, rng);
    CHECK(direct_objective(s, cells, dt, dr, other, 1.3) - rho.dot(other.cwiseAbs2()) < best);
  }
}

TEST_CASE("Armijo ascent never lowers the objective and respects the bounds") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const Setup s = make_setup(8, 6, 6, rng);
    const std::vector<Index> cells{1, 9, 40};
    const OffsetProblem p(s.y, s.grid, s.gram, s.m_r, cells, complex_vec(3, rng), 1.0);
    MStepConfig cfg;
    cfg.max_inner = 30;
    const OffsetAscent a = ascend_offsets(p, VectorXd::Zero(3), VectorXd::Zero(3), cfg);
    for (std::size_t k = 1; k < a.values.size(); ++k) CHECK(a.values[k] >= a.values[k - 1]);
    CHECK(a.dt.cwiseAbs().maxCoeff() <= s.grid.half_spacing());
    CHECK(a.dr.cwiseAbs().maxCoeff() <= s.grid.half_spacing());
    CHECK(a.values.back() == doctest::Approx(p.value(a.dt, a.dr)));
  }
}

TEST_CASE("offset ascent finds the off-grid direction found by a grid search") {
  std::mt19937_64 rng(6);
  const Index q = 8, m = 8;
  const auto grid = build_grid<double>(q);
  const MatrixXc gram = MatrixXc::Identity(m, m) * double(m);
  const double h = grid.half_spacing();
  for (int t = 0; t < 5; ++t) {
    const Index i = 2 + t;
    const Index cell = grid.index(i, i);
    const double truth = uniform_vec(1, -0.8 * h, 0.8 * h, rng)[0];
    auto off = OffsetVectors<double>::zeros(grid.q_total);
    off.dtheta_t[cell] = truth;
    off.dtheta_r[cell] = truth;
    const auto d = measurement_matrix(grid, off, gram, m);
    const VectorXc y = d.F.col(cell) * cdouble(1.5, -0.5);
    const OffsetProblem p(y, grid, gram, m, {cell}, 1.0, VectorXd::Constant(1, 1e-6));

    double best = -1e300, arg_t = 0, arg_r = 0;
    for (int a = -100; a <= 100; ++a)
      for (int b = -100; b <= 100; ++b) {
        const VectorXd xt = VectorXd::Constant(1, a * h / 100), xr = VectorXd::Constant(1, b * h / 100);
        const double v = p.value(xt, xr);
        if (v > best) {
          best = v;
          arg_t = xt[0];
          arg_r = xr[0];
        }
      }
    MStepConfig cfg;
    cfg.max_inner = 200;
    cfg.stall_tol = 1e-9;
    const OffsetAscent a = ascend_offsets(p, VectorXd::Zero(1), VectorXd::Zero(1), cfg);
    CHECK(std::abs(a.dt[0] - arg_t) < 0.1 * h);
    CHECK(std::abs(a.dr[0] - arg_r) < 0.1 * h);
    CHECK(std::abs(a.dt[0] - truth) < 0.01 * h);
  }
}

TEST_CASE("pseudo-likelihood and its gradient") {
  std::mt19937_64 rng(7);
  const Index q = 4;
  CrossIsing ising = CrossIsing::uniform(q, 0.0);
  ising.omega = uniform_vec(ising.edge_count(), -1.0, 1.0, rng);
  const VectorXd lambda = uniform_vec(q * q, 0.0, 1.0, rng);
  const VectorXd bias = uniform_vec(q * q, -3.0, 1.0, rng);

  CHECK((mean_field(lambda, bias, CrossIsing::uniform(q, 0.0)) - bias).norm() == 0.0);

  const VectorXd g = pseudo_likelihood_grad(lambda, bias, ising);
  VectorXd fd(g.size());
  const double step = 1e-6;
  for (Index k = 0; k < g.size(); ++k) {
    CrossIsing a = ising, b = ising;
    a.omega[k] += step;
    b.omega[k] -= step;
    fd[k] = (pseudo_likelihood(lambda, bias, a) - pseudo_likelihood(lambda, bias, b)) / (2 * step);
  }
  CHECK((fd - g).norm() / g.norm() < 1e-5);

  CHECK(pseudo_likelihood_grad(VectorXd::Zero(q * q), bias, ising).norm() == 0.0);
  CHECK_THROWS_AS(pseudo_likelihood(VectorXd::Zero(3), bias, ising), std::invalid_argument);
}

TEST_CASE("coupling update climbs the pseudo-likelihood inside the bounds") {
  const Index q = 3;
  const CrossIsing ising = CrossIsing::uniform(q, 0.5);
  // Every cell of row and column 0 fully active, everything else off.
  VectorXd lambda = VectorXd::Zero(q * q);
  for (Index j = 0; j < q; ++j) lambda[j] = lambda[j * q] = 1.0;
  const VectorXd bias = VectorXd::Constant(q * q, -2.0);
  MStepConfig cfg;
  const OmegaUpdate u = update_omega(lambda, bias, ising, cfg);
  CHECK(u.accepted);
  CHECK(u.value > pseudo_likelihood(lambda, bias, ising));
  CHECK(u.omega.maxCoeff() <= cfg.omega_max);
  CHECK(u.omega.minCoeff() >= cfg.omega_min);
  CHECK(u.omega[ising.row_edge(0, 1)] > 0.5);

  CrossIsing pinned = CrossIsing::uniform(q, cfg.omega_max);
  const OmegaUpdate v = update_omega(lambda, VectorXd::Constant(q * q, -20.0), pinned, cfg);
  CHECK(v.omega.maxCoeff() <= cfg.omega_max);
}
