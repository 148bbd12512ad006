#pragma once

#include <vector>

#include "mpsense/types.hpp"

namespace mpsense {

/// Gamma hyperparameters of the three-layer prior.
///
/// Active cells draw their precision from Gamma(a, b) with a/b of order one;
/// inactive cells from Gamma(a_bar, b_bar) with a_bar/b_bar >> 1 so the
/// coefficient is pinned near zero. (c, d) parameterise the noise precision.
struct SparsityHyper {
  double a = 1.0;
  double b = 1.0;
  double a_bar = 1.0;
  double b_bar = 1e-6;
  double c = 1e-3;
  double d = 1e-3;

  void validate() const;
};

/// Edge between an off-diagonal (first-order) cell and one of its two diagonal cells.
struct IsingEdge {
  Index offdiag;
  Index diag;
};

/// Ising prior over the support of the Q x Q cell grid.
///
/// Off-diagonal cell (i, j) couples to the diagonal cells (i, i) and (j, j).
/// Edges are stored pair-major: ordered pair p = (i, j) owns edge 2p towards
/// (i, i) and edge 2p + 1 towards (j, j), pairs enumerated i-major.
struct CrossIsing {
  Index q_base = 0;
  VectorXd omega;  // one coupling per edge

  static CrossIsing uniform(Index q, double w);

  Index q_total() const { return q_base * q_base; }
  Index pair_count() const { return q_base * (q_base - 1); }
  Index edge_count() const { return 2 * pair_count(); }
  /// Ordered pair index of off-diagonal cell (i, j), 0-based.
  Index pair_index(Index i, Index j) const { return i * (q_base - 1) + (j < i ? j : j - 1); }
  Index row_edge(Index i, Index j) const { return 2 * pair_index(i, j); }
  Index col_edge(Index i, Index j) const { return 2 * pair_index(i, j) + 1; }
};

std::vector<IsingEdge> edges(const CrossIsing& model);

/// Sum over edges of omega * s_a * s_b. Entries of s must be 0 or 1.
double log_unnormalized(const VectorXi& s, const CrossIsing& model);

/// Partition function by enumeration of all 2^(Q^2) states.
double partition_function(const CrossIsing& model);

/// Exact P(s_q = 1) of prod_q pi_q^s_q (1 - pi_q)^(1 - s_q) * exp(sum omega s s).
VectorXd bruteforce_marginals(const CrossIsing& model, const VectorXd& node_priors);

inline constexpr Index kMaxEnumerationNodes = 20;

}  // namespace mpsense
