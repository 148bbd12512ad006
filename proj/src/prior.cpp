#include "mpsense/prior.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace mpsense {

void SparsityHyper::validate() const {
  if (!(a > 0 && b > 0 && a_bar > 0 && b_bar > 0 && c > 0 && d > 0))
    throw std::invalid_argument("SparsityHyper: all hyperparameters must be positive");
}

CrossIsing CrossIsing::uniform(Index q, double w) {
  if (q < 2) throw std::invalid_argument("CrossIsing: Q must be >= 2");
  CrossIsing m;
  m.q_base = q;
  m.omega = VectorXd::Constant(m.edge_count(), w);
  return m;
}

std::vector<IsingEdge> edges(const CrossIsing& model) {
  const Index q = model.q_base;
  std::vector<IsingEdge> out;
  out.reserve(static_cast<std::size_t>(model.edge_count()));
  for (Index i = 0; i < q; ++i)
    for (Index j = 0; j < q; ++j) {
      if (i == j) continue;
      out.push_back({i * q + j, i * q + i});
      out.push_back({i * q + j, j * q + j});
    }
  return out;
}

double log_unnormalized(const VectorXi& s, const CrossIsing& model) {
  if (s.size() != model.q_total()) throw std::invalid_argument("log_unnormalized: state length must be Q^2");
  for (Index q = 0; q < s.size(); ++q)
    if (s[q] != 0 && s[q] != 1) throw std::invalid_argument("log_unnormalized: state must be binary");
  const auto e = edges(model);
  double acc = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k)
    if (s[e[k].offdiag] && s[e[k].diag]) acc += model.omega[static_cast<Index>(k)];
  return acc;
}

namespace {

// Visits every binary state with its log weight. Degenerate priors give -inf.
template <typename Visit>
void enumerate_states(const CrossIsing& model, const VectorXd& log_on, const VectorXd& log_off,
                      Visit visit) {
  const Index n = model.q_total();
  if (n > kMaxEnumerationNodes) throw std::invalid_argument("enumeration bound exceeded");
  const auto e = edges(model);
  VectorXi s(n);
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
    double lw = 0.0;
    for (Index q = 0; q < n; ++q) {
      s[q] = static_cast<int>((code >> q) & 1u);
      lw += s[q] ? log_on[q] : log_off[q];
    }
    for (std::size_t k = 0; k < e.size(); ++k)
      if (s[e[k].offdiag] && s[e[k].diag]) lw += model.omega[static_cast<Index>(k)];
    visit(s, lw);
  }
}

}  // namespace

double partition_function(const CrossIsing& model) {
  const Index n = model.q_total();
  double z = 0.0;
  enumerate_states(model, VectorXd::Zero(n), VectorXd::Zero(n),
                   [&](const VectorXi&, double lw) { z += std::exp(lw); });
  return z;
}

VectorXd bruteforce_marginals(const CrossIsing& model, const VectorXd& node_priors) {
  const Index n = model.q_total();
  if (node_priors.size() != n) throw std::invalid_argument("bruteforce_marginals: prior length must be Q^2");
  VectorXd log_on(n), log_off(n);
  for (Index q = 0; q < n; ++q) {
    log_on[q] = std::log(node_priors[q]);
    log_off[q] = std::log1p(-node_priors[q]);
  }

  // Two passes: the first finds the max log weight for a stable sum.
  double max_lw = -std::numeric_limits<double>::infinity();
  enumerate_states(model, log_on, log_off, [&](const VectorXi&, double lw) { max_lw = std::max(max_lw, lw); });
  double z = 0.0;
  VectorXd on = VectorXd::Zero(n);
  enumerate_states(model, log_on, log_off, [&](const VectorXi& s, double lw) {
    const double w = std::exp(lw - max_lw);
    z += w;
    for (Index q = 0; q < n; ++q)
      if (s[q]) on[q] += w;
  });
  return on / z;
}

}  // namespace mpsense
