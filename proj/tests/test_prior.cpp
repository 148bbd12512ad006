#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "mpsense/prior.hpp"

using namespace mpsense;

TEST_CASE("edge set of the cross graph") {
  const auto m2 = CrossIsing::uniform(2, 0.5);
  const auto e2 = edges(m2);
  REQUIRE(e2.size() == 4);
  CHECK(e2[0].offdiag == 1);
  CHECK(e2[0].diag == 0);
  CHECK(e2[1].offdiag == 1);
  CHECK(e2[1].diag == 3);
  CHECK(e2[2].offdiag == 2);
  CHECK(e2[2].diag == 3);
  CHECK(e2[3].offdiag == 2);
  CHECK(e2[3].diag == 0);

  const auto m3 = CrossIsing::uniform(3, 0.5);
  CHECK(edges(m3).size() == 12);

  const auto m5 = CrossIsing::uniform(5, 1.0);
  std::map<Index, int> degree;
  for (const auto& e : edges(m5)) {
    CHECK(e.offdiag / 5 != e.offdiag % 5);
    CHECK(e.diag / 5 == e.diag % 5);
    ++degree[e.diag];
    ++degree[e.offdiag];
  }
  for (Index i = 0; i < 5; ++i) CHECK(degree[i * 5 + i] == 8);
  for (Index q = 0; q < 25; ++q)
    if (q / 5 != q % 5) CHECK(degree[q] == 2);

  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) {
      if (i == j) continue;
      const auto all = edges(m5);
      CHECK(all[static_cast<std::size_t>(m5.row_edge(i, j))].diag == i * 5 + i);
      CHECK(all[static_cast<std::size_t>(m5.col_edge(i, j))].diag == j * 5 + j);
      CHECK(all[static_cast<std::size_t>(m5.row_edge(i, j))].offdiag == i * 5 + j);
    }
}

TEST_CASE("log_unnormalized") {
  const auto m = CrossIsing::uniform(2, 0.5);
  CHECK(log_unnormalized(VectorXi::Zero(4), m) == 0.0);
  CHECK(log_unnormalized(VectorXi::Ones(4), m) == doctest::Approx(2.0));
  VectorXi lone = VectorXi::Zero(4);
  lone[1] = 1;
  CHECK(log_unnormalized(lone, m) == 0.0);
  VectorXi bad = VectorXi::Zero(4);
  bad[2] = 2;
  CHECK_THROWS_AS(log_unnormalized(bad, m), std::invalid_argument);
  CHECK_THROWS_AS(log_unnormalized(VectorXi::Zero(3), m), std::invalid_argument);
}

TEST_CASE("log_unnormalized is monotone under attractive couplings") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> w(0.0, 2.0);
  auto m = CrossIsing::uniform(3, 0.0);
  for (Index k = 0; k < m.omega.size(); ++k) m.omega[k] = w(rng);
  for (std::uint32_t code = 0; code < (1u << 9); ++code) {
    VectorXi s(9);
    for (Index q = 0; q < 9; ++q) s[q] = (code >> q) & 1u;
    for (Index q = 0; q < 9; ++q) {
      if (s[q]) continue;
      VectorXi t = s;
      t[q] = 1;
      CHECK(log_unnormalized(t, m) >= log_unnormalized(s, m));
    }
  }
}

TEST_CASE("partition function equals the explicit state sum") {
  auto m = CrossIsing::uniform(2, 0.0);
  m.omega << 0.3, -0.7, 1.1, 0.25;
  double z = 0.0;
  for (int code = 0; code < 16; ++code) {
    VectorXi s(4);
    for (int q = 0; q < 4; ++q) s[q] = (code >> q) & 1;
    z += std::exp(log_unnormalized(s, m));
  }
  CHECK(partition_function(m) == doctest::Approx(z).epsilon(1e-14));
  CHECK(partition_function(CrossIsing::uniform(2, 0.0)) == doctest::Approx(16.0));
}

TEST_CASE("bruteforce marginals") {
  const VectorXd p = (VectorXd(4) << 0.2, 0.6, 0.35, 0.9).finished();
  CHECK((bruteforce_marginals(CrossIsing::uniform(2, 0.0), p) - p).cwiseAbs().maxCoeff() < 1e-14);

  const VectorXd half = VectorXd::Constant(4, 0.5);
  const VectorXd b = bruteforce_marginals(CrossIsing::uniform(2, 1.0), half);
  CHECK(b[0] > 0.5);
  CHECK(b[3] > 0.5);
  // Hand enumeration for Q = 2, omega = 1: each off-diagonal node sees both diagonals.
  double z = 0.0, on0 = 0.0;
  for (int code = 0; code < 16; ++code) {
    const int s0 = code & 1, s1 = (code >> 1) & 1, s2 = (code >> 2) & 1, s3 = (code >> 3) & 1;
    const double w = std::exp(double(s1 * s0 + s1 * s3 + s2 * s3 + s2 * s0));
    z += w;
    if (s0) on0 += w;
  }
  CHECK(b[0] == doctest::Approx(on0 / z).epsilon(1e-13));

  const VectorXd hard = (VectorXd(4) << 0.0, 1.0, 1.0, 0.0).finished();
  CHECK((bruteforce_marginals(CrossIsing::uniform(2, 3.0), hard) - hard).cwiseAbs().maxCoeff() < 1e-14);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.01, 0.99), w(-2.0, 2.0);
  auto m = CrossIsing::uniform(3, 0.0);
  for (Index k = 0; k < m.omega.size(); ++k) m.omega[k] = w(rng);
  VectorXd pr(9);
  for (Index q = 0; q < 9; ++q) pr[q] = u(rng);
  const VectorXd r = bruteforce_marginals(m, pr);
  CHECK(r.minCoeff() >= 0.0);
  CHECK(r.maxCoeff() <= 1.0);

  CHECK_THROWS_AS(bruteforce_marginals(CrossIsing::uniform(5, 1.0), VectorXd::Constant(25, 0.5)),
                  std::invalid_argument);
}

TEST_CASE("marginals respect the transpose symmetry") {
  auto m = CrossIsing::uniform(3, 0.0);
  VectorXd p(9);
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.05, 0.95), w(0.0, 1.5);
  // Symmetric couplings and priors under (i, j) <-> (j, i).
  for (Index i = 0; i < 3; ++i) {
    p[i * 3 + i] = u(rng);
    for (Index j = i + 1; j < 3; ++j) {
      p[i * 3 + j] = p[j * 3 + i] = u(rng);
      const double a = w(rng), b = w(rng);
      m.omega[m.row_edge(i, j)] = a;
      m.omega[m.col_edge(j, i)] = a;
      m.omega[m.col_edge(i, j)] = b;
      m.omega[m.row_edge(j, i)] = b;
    }
  }
  const VectorXd r = bruteforce_marginals(m, p);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) CHECK(r[i * 3 + j] == doctest::Approx(r[j * 3 + i]).epsilon(1e-13));
}

TEST_CASE("hyperparameter validation") {
  SparsityHyper h;
  CHECK_NOTHROW(h.validate());
  CHECK(h.a / h.b == doctest::Approx(1.0));
  CHECK(h.a_bar / h.b_bar > 1e5);
  h.b_bar = 0;
  CHECK_THROWS_AS(h.validate(), std::invalid_argument);
}
